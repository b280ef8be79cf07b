use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::SpreError;
use crate::index_poly::Design;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceDesign {
    /// `½ {1, 1/2, 1/3, 1/4}`.
    #[serde(rename = "cubature-d1")]
    Cubature1,
    /// Six points, `½ {(1,1), (1,½), (½,1), (½,½), (1,⅓), (⅓,1)}`.
    #[serde(rename = "cubature-d2")]
    Cubature2,
    /// Eight points, `½` times the corners of `[½,1]³` in the listed order.
    #[serde(rename = "cubature-d3")]
    Cubature3,
    /// The eight-point three-parameter design used for the simulator case
    /// studies.
    CaseStudy,
}

impl ReferenceDesign {
    pub const ALL: [ReferenceDesign; 4] = [
        ReferenceDesign::Cubature1,
        ReferenceDesign::Cubature2,
        ReferenceDesign::Cubature3,
        ReferenceDesign::CaseStudy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReferenceDesign::Cubature1 => "cubature-d1",
            ReferenceDesign::Cubature2 => "cubature-d2",
            ReferenceDesign::Cubature3 => "cubature-d3",
            ReferenceDesign::CaseStudy => "case-study",
        }
    }

    /// The cubature design of the given dimension.
    pub fn cubature(dim: usize) -> Option<Self> {
        match dim {
            1 => Some(ReferenceDesign::Cubature1),
            2 => Some(ReferenceDesign::Cubature2),
            3 => Some(ReferenceDesign::Cubature3),
            _ => None,
        }
    }
}

impl fmt::Display for ReferenceDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReferenceDesign {
    type Err = SpreError;

    fn from_str(s: &str) -> Result<Self, SpreError> {
        ReferenceDesign::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| SpreError::UnknownDesign(s.to_string()))
    }
}

const CASE_STUDY: [[f64; 3]; 8] = [
    [0.062, 0.812, 0.437],
    [0.187, 0.312, 0.937],
    [0.312, 0.937, 0.187],
    [0.437, 0.062, 0.687],
    [0.562, 0.687, 0.062],
    [0.687, 0.187, 0.562],
    [0.812, 0.562, 0.312],
    [0.937, 0.437, 0.812],
];

pub fn reference_design(which: ReferenceDesign) -> Design {
    let half = |pts: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        pts.into_iter()
            .map(|p| p.into_iter().map(|c| 0.5 * c).collect())
            .collect()
    };
    let points = match which {
        ReferenceDesign::Cubature1 => half(vec![vec![1.0], vec![0.5], vec![1.0 / 3.0], vec![0.25]]),
        ReferenceDesign::Cubature2 => half(vec![
            vec![1.0, 1.0],
            vec![1.0, 0.5],
            vec![0.5, 1.0],
            vec![0.5, 0.5],
            vec![1.0, 1.0 / 3.0],
            vec![1.0 / 3.0, 1.0],
        ]),
        ReferenceDesign::Cubature3 => half(vec![
            vec![1.0, 1.0, 1.0],
            vec![1.0, 1.0, 0.5],
            vec![1.0, 0.5, 1.0],
            vec![0.5, 1.0, 1.0],
            vec![1.0, 0.5, 0.5],
            vec![0.5, 1.0, 0.5],
            vec![0.5, 0.5, 1.0],
            vec![0.5, 0.5, 0.5],
        ]),
        ReferenceDesign::CaseStudy => CASE_STUDY.iter().map(|p| p.to_vec()).collect(),
    };
    Design::new(points).expect("reference designs are valid")
}
