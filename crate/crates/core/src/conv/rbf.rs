use serde::{Deserialize, Serialize};

/// Compactly supported radial kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RbfKind {
    #[default]
    Cubic,
    Gaussian,
}

impl std::str::FromStr for RbfKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cubic" => Ok(RbfKind::Cubic),
            "gaussian" => Ok(RbfKind::Gaussian),
            _ => Err(format!("unknown rbf `{s}` (cubic|gaussian)")),
        }
    }
}

impl std::fmt::Display for RbfKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RbfKind::Cubic => "cubic",
            RbfKind::Gaussian => "gaussian",
        })
    }
}

/// Kernel value (`order` 0) or radial derivative d/dr (`order` 1) at distance
/// `r` with dilation `a`. Zero beyond r = a.
pub fn rbf_eval(kind: RbfKind, r: f64, a: f64, order: usize) -> f64 {
    let z = r / a;
    if z > 1.0 {
        return 0.0;
    }
    match (kind, order) {
        (RbfKind::Cubic, 0) => {
            if z <= 0.5 {
                2.0 / 3.0 - 4.0 * z * z + 4.0 * z * z * z
            } else {
                4.0 / 3.0 - 4.0 * z + 4.0 * z * z - 4.0 / 3.0 * z * z * z
            }
        }
        (RbfKind::Cubic, _) => {
            let d = if z <= 0.5 {
                -8.0 * z + 12.0 * z * z
            } else {
                -4.0 + 8.0 * z - 4.0 * z * z
            };
            d / a
        }
        (RbfKind::Gaussian, 0) => (-z * z).exp(),
        (RbfKind::Gaussian, _) => -2.0 * z / a * (-z * z).exp(),
    }
}
