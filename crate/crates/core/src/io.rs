//! Dataset CSV files.
//!
//! The header names the columns `x_1, …, x_d, f` and optionally `cost`, in that
//! order. Each row is one simulator run.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Result, SpreError};
use crate::extrapolate::Dataset;
use crate::index_poly::Design;

pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let has_cost = headers.last().is_some_and(|h| h == "cost");
    let n_x = headers.len().saturating_sub(if has_cost { 2 } else { 1 });
    if n_x == 0 {
        return Err(SpreError::invalid(
            "dataset needs at least one x column and an f column",
        ));
    }
    for (j, h) in headers.iter().take(n_x).enumerate() {
        if *h != format!("x_{}", j + 1) {
            return Err(SpreError::invalid(format!("expected column x_{}, found {h:?}", j + 1)));
        }
    }
    if headers[n_x] != "f" {
        return Err(SpreError::invalid(format!(
            "expected column f, found {:?}",
            headers[n_x]
        )));
    }

    let mut design = Design::empty(n_x);
    let mut values = Vec::new();
    let mut costs = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let nums = record
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| SpreError::invalid(format!("row {}: {s:?} is not a number", line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if nums.len() != headers.len() {
            return Err(SpreError::invalid(format!(
                "row {} has {} fields",
                line + 1,
                nums.len()
            )));
        }
        design.push(nums[..n_x].to_vec())?;
        values.push(nums[n_x]);
        if has_cost {
            costs.push(nums[n_x + 1]);
        }
    }
    let data = Dataset::new(design, values)?;
    if has_cost {
        data.with_costs(costs)
    } else {
        Ok(data)
    }
}

pub fn read_dataset_file(path: impl AsRef<Path>) -> Result<Dataset> {
    read_dataset(std::fs::File::open(path)?)
}

pub fn write_dataset<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("x_{j}")).collect();
    header.push("f".into());
    if data.costs().is_some() {
        header.push("cost".into());
    }
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut row: Vec<String> = data.design().point(i).iter().map(|v| v.to_string()).collect();
        row.push(data.values()[i].to_string());
        if let Some(c) = data.costs() {
            row.push(c[i].to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset_file(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_dataset(data, std::fs::File::create(path)?)
}
