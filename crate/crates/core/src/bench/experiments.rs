use super::report::{AcceptanceBand, BandTarget, Column, ConvergenceReport, ExperimentMeta, ReportRow};
use crate::conv::{ConvSpec, RbfKind};
use crate::error::{CigaError, Result};
use crate::fe::{
    assemble_elasticity, assemble_poisson, build_shape_table, compute_error_norms, elasticity_energy_error,
    exact, gauss_legendre, group_nodes, interface_deviation, CompatMode, NodalField, Shape1d, SolveConfig,
    SolverKind,
};
use crate::inverse::{invert_point, InverseMapConfig};
use crate::mesh::{generate_1d_two_map, generate_plate_with_hole, PlateOptions, PLATE_HOLE_RADIUS};
use crate::par::Execution;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// Nodal data of the 1D study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interp1dCase {
    /// u_i = sin x_i.
    Smooth,
    /// u = 1, 2, 1, 2, ...
    Oscillatory,
}

impl std::str::FromStr for Interp1dCase {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "smooth" => Ok(Self::Smooth),
            "oscillatory" => Ok(Self::Oscillatory),
            _ => Err(format!("unknown case `{s}` (smooth|oscillatory)")),
        }
    }
}

impl std::fmt::Display for Interp1dCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Smooth => "smooth",
            Self::Oscillatory => "oscillatory",
        })
    }
}

/// Parameters shared by all experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub p: usize,
    pub s: usize,
    /// Dilation; `None` means s + 1.
    pub a: Option<f64>,
    pub rbf: RbfKind,
    pub compat: CompatMode,
    /// Number of refinement levels, level L having 10 * 2^L elements per
    /// direction (per patch).
    pub levels: u32,
    pub solver: SolverKind,
    pub exec: Execution,
    pub inverse: InverseMapConfig,
    /// Write the stiffness matrix of every level here (Matrix Market).
    pub dump_matrix: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(p: usize, s: usize, levels: u32) -> Self {
        ExperimentConfig {
            p,
            s,
            a: None,
            rbf: RbfKind::default(),
            compat: CompatMode::Nodal,
            levels,
            solver: SolverKind::Direct,
            exec: Execution::default(),
            inverse: InverseMapConfig::default(),
            dump_matrix: None,
        }
    }

    pub fn spec(&self) -> ConvSpec {
        let mut spec = ConvSpec::new(self.s, self.p);
        if let Some(a) = self.a {
            spec.a = a;
        }
        spec.rbf = self.rbf;
        spec
    }

    fn meta(&self, experiment: &str, case: Option<String>) -> ExperimentMeta {
        ExperimentMeta {
            experiment: experiment.to_string(),
            case,
            p: self.p,
            s: self.s,
            a: self.spec().a,
            compat_mode: self.compat.to_string(),
            rbf: self.rbf.to_string(),
        }
    }

    fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            compat_mode: self.compat,
            solver: self.solver,
            exec: self.exec,
            ..SolveConfig::default()
        }
    }

    fn validate(&self, min_levels: u32) -> Result<()> {
        if self.levels < min_levels {
            return Err(CigaError::Config(format!("at least {min_levels} levels are required, got {}", self.levels)));
        }
        if self.p == 0 {
            return Err(CigaError::Config("reproducing order must be at least 1".into()));
        }
        Ok(())
    }
}

/// Relative L2 deviation between the interpolants built on the two maps,
/// integrated over [0, 10] with Gauss rules on the physical elements.
fn deviation_1d(maps: &crate::mesh::TwoMap1d, shapes: &[Shape1d; 2], values: &[f64], nq: usize, inv: &InverseMapConfig) -> Result<f64> {
    let (gx, gw) = gauss_legendre(nq);
    let (mut d2, mut n1, mut n2) = (0.0, 0.0, 0.0);
    for e in 0..maps.x.len() - 1 {
        let (x0, x1) = (maps.x[e], maps.x[e + 1]);
        for (l, w) in gx.iter().zip(&gw) {
            let x = x0 + l * (x1 - x0);
            let mut u = [0.0; 2];
            for k in 0..2 {
                let t0 = maps.params[k][e];
                let t1 = maps.params[k][e + 1];
                let xi = invert_point(&maps.maps[k], [x, 0.0], inv, Some([t0 + l * (t1 - t0), 0.0]))?;
                u[k] = shapes[k].interpolate(xi[0], values)?;
            }
            let wx = w * (x1 - x0);
            d2 += wx * (u[0] - u[1]).powi(2);
            n1 += wx * u[0] * u[0];
            n2 += wx * u[1] * u[1];
        }
    }
    Ok(d2.sqrt() / (n1.sqrt() + n2.sqrt()))
}

/// Interpolation deviation between two parameterizations of [0, 10].
pub fn run_interp1d(case: Interp1dCase, cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate(4)?;
    let spec = cfg.spec();
    let mut rows = Vec::new();
    for level in 0..cfg.levels {
        let n = 10usize << level;
        let maps = generate_1d_two_map(n, &cfg.inverse)?;
        let shapes = [
            Shape1d::new(&maps.maps[0], &maps.params[0], &spec)?,
            Shape1d::new(&maps.maps[1], &maps.params[1], &spec)?,
        ];
        let values: Vec<f64> = match case {
            Interp1dCase::Smooth => maps.x.iter().map(|x| x.sin()).collect(),
            Interp1dCase::Oscillatory => (0..=n).map(|i| if i % 2 == 0 { 1.0 } else { 2.0 }).collect(),
        };
        let dev = deviation_1d(&maps, &shapes, &values, cfg.p + 3, &cfg.inverse)?;
        rows.push(ReportRow {
            level,
            h: 10.0 / n as f64,
            dof_count: n + 1,
            error_l2: None,
            error_h1_broken: None,
            error_energy: None,
            interface_deviation: Some(dev),
        });
    }
    Ok(ConvergenceReport {
        meta: cfg.meta("interp1d", Some(case.to_string())),
        rows,
    })
}

fn plate(cfg: &ExperimentConfig, level: u32, split: bool) -> Result<(crate::mesh::MultiPatchMesh, Vec<crate::spline::NurbsPatch>)> {
    let mut opts = PlateOptions::level(level, true);
    opts.g0_layout = split;
    generate_plate_with_hole(opts, &cfg.inverse)
}

/// Nodal interpolation of the Kirsch sigma_xx field on the plate.
pub fn run_interp2d(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate(3)?;
    let mut rows = Vec::new();
    for level in 0..cfg.levels {
        let (mesh, patches) = plate(cfg, level, cfg.compat == CompatMode::G0)?;
        let table = build_shape_table(&mesh, &patches, cfg.spec(), cfg.compat, cfg.exec)?;
        let dofs = crate::fe::DofMap::new(&mesh, 1, cfg.compat == CompatMode::Penalty);
        let mut u = vec![0.0; dofs.num_dofs()];
        for n in 0..mesh.num_nodes() {
            let v = exact::kirsch_stress(mesh.nodes[n], PLATE_HOLE_RADIUS)[0];
            for s in dofs.slots_of(&mesh, n) {
                u[s] = v;
            }
        }
        let field = NodalField { dofs: &dofs, u: &u };
        let exact_fn = |x: crate::spline::Point| (exact::kirsch_stress(x, PLATE_HOLE_RADIUS)[0], [0.0; 2]);
        let norms = compute_error_norms(&table, field, &exact_fn, cfg.p + 2)?;
        let dev = interface_deviation(&table, field, cfg.p + 2)?;
        rows.push(ReportRow {
            level,
            h: 1.0 / (10usize << level) as f64,
            dof_count: dofs.num_dofs(),
            error_l2: Some(norms.relative_l2()),
            error_h1_broken: None,
            error_energy: None,
            interface_deviation: Some(dev.relative),
        });
    }
    Ok(ConvergenceReport {
        meta: cfg.meta("interp2d", None),
        rows,
    })
}

fn dump(cfg: &ExperimentConfig, name: &str, level: u32, k: &crate::fe::Csr) -> Result<()> {
    if let Some(dir) = &cfg.dump_matrix {
        std::fs::create_dir_all(dir)?;
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{name}_level{level}.mtx")))?);
        k.write_matrix_market(&mut f)?;
    }
    Ok(())
}

/// Gaussian-hump Poisson problem on the plate, Dirichlet data everywhere.
pub fn run_poisson(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate(3)?;
    let solve_cfg = cfg.solve_config();
    let nq = solve_cfg.quadrature(cfg.p);
    let mut rows = Vec::new();
    for level in 0..cfg.levels {
        let (mesh, patches) = plate(cfg, level, cfg.compat == CompatMode::G0)?;
        let table = build_shape_table(&mesh, &patches, cfg.spec(), cfg.compat, cfg.exec)?;
        let sys = assemble_poisson(&table, &exact::hump_source, &exact::hump, &solve_cfg)?;
        dump(cfg, "poisson", level, &sys.k)?;
        let sol = crate::fe::solve_system(&sys, &solve_cfg)?;
        let field = NodalField { dofs: &sys.dofs, u: &sol.u };
        let exact_fn = |x: crate::spline::Point| (exact::hump(x), exact::hump_grad(x));
        let norms = compute_error_norms(&table, field, &exact_fn, nq)?;
        let dev = interface_deviation(&table, field, nq)?;
        rows.push(ReportRow {
            level,
            h: 1.0 / (10usize << level) as f64,
            dof_count: sys.dofs.num_dofs(),
            error_l2: Some(norms.relative_l2()),
            error_h1_broken: Some(norms.h1_broken / norms.exact_h1),
            error_energy: Some(norms.relative_energy()),
            interface_deviation: Some(dev.relative),
        });
    }
    Ok(ConvergenceReport {
        meta: cfg.meta("poisson", None),
        rows,
    })
}

/// Young's modulus and Poisson's ratio of the plate.
pub const PLATE_MATERIAL: (f64, f64) = (1e3, 0.3);

/// Kirsch plate under its exact tractions with quarter symmetry.
pub fn run_elasticity(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate(3)?;
    let solve_cfg = cfg.solve_config();
    let nq = solve_cfg.quadrature(cfg.p);
    let (young, nu) = PLATE_MATERIAL;
    let stress = |x: crate::spline::Point| exact::kirsch_stress(x, PLATE_HOLE_RADIUS);
    let traction = |group: &str, x: crate::spline::Point| -> Option<[f64; 2]> {
        let s = stress(x);
        match group {
            "left" => Some([-s[0], -s[2]]),
            "top" => Some([s[2], s[1]]),
            _ => None,
        }
    };
    let mut rows = Vec::new();
    for level in 0..cfg.levels {
        let (mesh, patches) = plate(cfg, level, cfg.compat == CompatMode::G0)?;
        let table = build_shape_table(&mesh, &patches, cfg.spec(), cfg.compat, cfg.exec)?;
        let mut fixed: Vec<(usize, usize, f64)> = group_nodes(&mesh, "right").into_iter().map(|n| (n, 0, 0.0)).collect();
        fixed.extend(group_nodes(&mesh, "bottom").into_iter().map(|n| (n, 1, 0.0)));
        let sys = assemble_elasticity(&table, young, nu, fixed, &traction, &solve_cfg)?;
        dump(cfg, "elasticity", level, &sys.k)?;
        let sol = crate::fe::solve_system(&sys, &solve_cfg)?;
        let field = NodalField { dofs: &sys.dofs, u: &sol.u };
        let norms = elasticity_energy_error(&table, field, young, nu, &stress, nq)?;
        let dev = interface_deviation(&table, field, nq)?;
        rows.push(ReportRow {
            level,
            h: 1.0 / (10usize << level) as f64,
            dof_count: sys.dofs.num_dofs(),
            error_l2: None,
            error_h1_broken: None,
            error_energy: Some(norms.energy),
            interface_deviation: Some(dev.relative),
        });
    }
    Ok(ConvergenceReport {
        meta: cfg.meta("elasticity", None),
        rows,
    })
}

/// Acceptance bands that apply to an experiment configuration.
pub fn acceptance_bands(meta: &ExperimentMeta) -> Vec<AcceptanceBand> {
    use BandTarget::*;
    use Column::*;
    let (p, s) = (meta.p, meta.s);
    let mut b = Vec::new();
    match (meta.experiment.as_str(), meta.compat_mode.as_str()) {
        ("interp1d", _) => match meta.case.as_deref() {
            Some("smooth") if (1..=3).contains(&p) => {
                let r = (p + 1) as f64;
                b.push(AcceptanceBand::new("smooth deviation rate", Rate(InterfaceDeviation), r - 0.3, r + 0.3));
            }
            Some("oscillatory") if (2..=3).contains(&p) => {
                b.push(AcceptanceBand::new("oscillatory deviation rate", Rate(InterfaceDeviation), 0.8, 1.2));
            }
            _ => {}
        },
        ("interp2d", _) if p == 2 && s == 2 => b.push(AcceptanceBand::new("L2 rate", Rate(ErrorL2), 2.7, f64::INFINITY)),
        ("interp2d", _) if p == 3 && s == 3 => b.push(AcceptanceBand::new("L2 rate", Rate(ErrorL2), 3.6, f64::INFINITY)),
        ("poisson", "g0") => {
            b.push(AcceptanceBand::new("max interface deviation", MaxValue(InterfaceDeviation), 0.0, 1e-10));
            if p == 2 && s == 2 {
                b.push(AcceptanceBand::new("energy rate", Rate(ErrorEnergy), 1.8, f64::INFINITY));
            }
            if p == 3 && s == 3 {
                b.push(AcceptanceBand::new("energy rate", Rate(ErrorEnergy), 3.0, f64::INFINITY));
            }
        }
        ("poisson", "nodal") if p == 2 && s == 2 => {
            b.push(AcceptanceBand::new("energy rate", Rate(ErrorEnergy), 1.0, 1.6));
            b.push(AcceptanceBand::new("deviation at 40x40", ValueAt(InterfaceDeviation, 40), 5e-6, 5e-5));
            b.push(AcceptanceBand::new("deviation rate", Rate(InterfaceDeviation), 0.7, 1.3));
        }
        ("elasticity", "nodal") if (2..=3).contains(&p) => {
            b.push(AcceptanceBand::new("deviation rate", Rate(InterfaceDeviation), 0.7, 1.3));
            b.push(AcceptanceBand::new("energy rate", Rate(ErrorEnergy), f64::NEG_INFINITY, 1.7));
        }
        _ => {}
    }
    b
}
