//! Command-line front end: reproducible experiments over the library,
//! emitting machine-readable JSON/CSV artifacts.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use torus_olp::darboux;
use torus_olp::gaussborel::factorize;
use torus_olp::laurent::{paper_example_weight, LaurentPolynomial};
use torus_olp::longilex::{LongilexBasis, MultiIndex};
use torus_olp::measure::{weight_spec_from_json, DeformedMeasure, GridOracle, HaarOracle};
use torus_olp::moments::build_moment;
use torus_olp::opbasis::{self, Side};
use torus_olp::toda;
use torus_olp::verify;
use torus_olp::{Error, Result};

#[derive(Parser)]
#[command(name = "torus-olp", version, about = "Orthogonal Laurent polynomials on the unit torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Lebesgue-Haar measure.
    Haar,
    /// The worked-example weight z1 + 1/z1 + z2 + 1/z2 + 5.
    Paper35,
}

#[derive(Args)]
struct MeasureArgs {
    /// Ambient dimension D.
    #[arg(long = "dim", short = 'D', default_value_t = 2)]
    dim: usize,
    /// Highest shell (truncation level K).
    #[arg(long = "trunc", short = 'K', default_value_t = 4)]
    trunc: u32,
    /// Weight specification file (JSON), relative to Haar.
    #[arg(long)]
    weight: Option<PathBuf>,
    /// Built-in weight preset.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
}

impl MeasureArgs {
    fn measure(&self) -> Result<DeformedMeasure> {
        if self.trunc < 2 {
            return Err(Error::InvalidConfig("truncation level K must be at least 2".into()));
        }
        let base = DeformedMeasure::new(Arc::new(HaarOracle::new(self.dim)));
        match (&self.weight, self.preset) {
            (Some(path), None) => {
                let text = std::fs::read_to_string(path)?;
                let v: serde_json::Value = serde_json::from_str(&text)?;
                weight_spec_from_json(self.dim, &v)
            }
            (None, Some(Preset::Haar)) | (None, None) => Ok(base),
            (None, Some(Preset::Paper35)) => {
                if self.dim != 2 {
                    return Err(Error::InvalidConfig("paper35 preset requires D = 2".into()));
                }
                Ok(base.with_step(paper_example_weight(), 1))
            }
            (Some(_), Some(_)) => {
                Err(Error::InvalidConfig("give either --weight or --preset, not both".into()))
            }
        }
    }

    fn basis(&self) -> Arc<LongilexBasis> {
        Arc::new(LongilexBasis::new(self.dim, self.trunc))
    }

    fn grid(&self) -> usize {
        GridOracle::default_grid_size(self.trunc)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate the longilex shells.
    Basis {
        #[arg(long = "dim", short = 'D', default_value_t = 2)]
        dim: usize,
        #[arg(long = "trunc", short = 'K', default_value_t = 4)]
        trunc: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assemble the moment matrix.
    Moments {
        #[command(flatten)]
        measure: MeasureArgs,
        #[arg(long, default_value = "json")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Gauss-Borel factorization: quasi-tau and subdiagonal blocks.
    Factorize {
        #[command(flatten)]
        measure: MeasureArgs,
        /// Also dump the full S matrix.
        #[arg(long)]
        full_s: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the biorthogonal family at a point.
    Eval {
        #[command(flatten)]
        measure: MeasureArgs,
        /// Shell index.
        #[arg(long, short)]
        k: usize,
        /// Point as re,im pairs: "re1,im1,re2,im2,...".
        #[arg(long, short)]
        z: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the Christoffel-Darboux kernel.
    Kernel {
        #[command(flatten)]
        measure: MeasureArgs,
        #[arg(long)]
        level: usize,
        #[arg(long)]
        z1: String,
        #[arg(long)]
        z2: String,
        /// Emit CSV samples of K(z1(t), z2) along the first torus angle.
        #[arg(long)]
        plot_data: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Nicety test of a Laurent polynomial.
    Nice {
        /// Polynomial JSON, inline.
        #[arg(long)]
        poly: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Darboux/Christoffel transform on a sampled poised node set.
    Darboux {
        #[command(flatten)]
        measure: MeasureArgs,
        /// Perturbing Laurent polynomial (JSON file). Defaults to the
        /// worked-example weight.
        #[arg(long = "L")]
        l_poly: Option<PathBuf>,
        #[arg(long, short, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Toda-flow residual checks.
    Toda {
        #[command(flatten)]
        measure: MeasureArgs,
        /// Deformation times (JSON file: [{"alpha": [...], "re": .., "im": ..}]).
        #[arg(long)]
        times: Option<PathBuf>,
        /// Which residual to compute.
        #[arg(long, default_value = "lax")]
        check: String,
        /// Finite-difference step.
        #[arg(long, default_value_t = 1e-4)]
        h: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance suite (or a preset baseline) and report pass/fail.
    Verify {
        /// Restrict to a preset baseline instead of the full suite.
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        #[arg(long = "dim", short = 'D', default_value_t = 2)]
        dim: usize,
        #[arg(long = "trunc", short = 'K', default_value_t = 4)]
        trunc: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// JSON with every float printed to 17 significant digits.
struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

fn to_json_string(value: &serde_json::Value) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFormatter);
    serde::Serialize::serialize(value, &mut ser)?;
    Ok(String::from_utf8(buf).expect("serializer emits utf-8"))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
        }
        None => {
            println!("{text}");
        }
    }
    Ok(())
}

fn parse_point(dim: usize, s: &str) -> Result<Vec<Complex64>> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidConfig(format!("bad point '{s}': {e}")))?;
    if parts.len() != 2 * dim {
        return Err(Error::InvalidConfig(format!(
            "point needs {} numbers (re,im per coordinate), got {}",
            2 * dim,
            parts.len()
        )));
    }
    Ok(parts.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect())
}

fn complex_json(c: Complex64) -> serde_json::Value {
    serde_json::json!({"re": c.re, "im": c.im})
}

fn matrix_json(m: &nalgebra::DMatrix<Complex64>) -> serde_json::Value {
    serde_json::json!((0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| vec![m[(i, j)].re, m[(i, j)].im]).collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

fn run() -> Result<i32> {
    let cli = Cli::parse();
    // accepted for forward compatibility; all kernels are single-threaded
    let _ = std::env::var("TORUS_OLP_THREADS");
    match cli.command {
        Command::Basis { dim, trunc, out } => {
            let basis = LongilexBasis::new(dim, trunc);
            emit(&out, &to_json_string(&basis.to_json())?)?;
        }
        Command::Moments { measure, format, out } => {
            let basis = measure.basis();
            let oracle = measure.measure()?.oracle(measure.grid())?;
            let g = build_moment(oracle, basis.clone())?;
            match format.as_str() {
                "csv" => {
                    let mut text = String::new();
                    let boundaries: Vec<usize> =
                        (0..=basis.num_shells()).map(|k| basis.cumulative(k.max(1) - 1)).collect();
                    text.push_str(&format!("# block boundaries: {boundaries:?}\n"));
                    for i in 0..basis.len() {
                        let row: Vec<String> = (0..basis.len())
                            .map(|j| {
                                format!("{:.16e}+{:.16e}i", g.data()[(i, j)].re, g.data()[(i, j)].im)
                            })
                            .collect();
                        text.push_str(&row.join(","));
                        text.push('\n');
                    }
                    emit(&out, &text)?;
                }
                _ => {
                    let v = serde_json::json!({
                        "D": basis.dim(),
                        "K": basis.max_longitude(),
                        "block_offsets": (0..basis.num_shells()).map(|k| basis.offset(k)).collect::<Vec<_>>(),
                        "hermitian_defect": g.hermitian_defect(),
                        "persymmetry_defect": g.persymmetry_defect(),
                        "matrix": matrix_json(g.data()),
                    });
                    emit(&out, &to_json_string(&v)?)?;
                }
            }
        }
        Command::Factorize { measure, full_s, out } => {
            let basis = measure.basis();
            let oracle = measure.measure()?.oracle(measure.grid())?;
            let g = build_moment(oracle, basis.clone())?;
            let f = factorize(&g)?;
            let mut v = serde_json::json!({
                "D": basis.dim(),
                "K": basis.max_longitude(),
                "reconstruction_residual": f.reconstruction_residual(g.data()),
                "h_blocks": (0..f.num_shells()).map(|k| matrix_json(f.h(k))).collect::<Vec<_>>(),
                "beta_blocks": (1..f.num_shells()).map(|k| matrix_json(&f.beta(k))).collect::<Vec<_>>(),
            });
            if full_s {
                v["s"] = matrix_json(f.s());
                v["s_hat"] = matrix_json(f.s_hat());
            }
            emit(&out, &to_json_string(&v)?)?;
        }
        Command::Eval { measure, k, z, out } => {
            let basis = measure.basis();
            let point = parse_point(basis.dim(), &z)?;
            let oracle = measure.measure()?.oracle(measure.grid())?;
            let g = build_moment(oracle, basis)?;
            let f = factorize(&g)?;
            let phi = opbasis::eval_family(&f, Side::Phi, k, &point)?;
            let phi_hat = opbasis::eval_family(&f, Side::PhiHat, k, &point)?;
            let v = serde_json::json!({
                "z": point.iter().map(|c| complex_json(*c)).collect::<Vec<_>>(),
                "k": k,
                "phi": phi.iter().map(|c| complex_json(*c)).collect::<Vec<_>>(),
                "phi_hat": phi_hat.iter().map(|c| complex_json(*c)).collect::<Vec<_>>(),
            });
            emit(&out, &to_json_string(&v)?)?;
        }
        Command::Kernel { measure, level, z1, z2, plot_data, out } => {
            let basis = measure.basis();
            let p1 = parse_point(basis.dim(), &z1)?;
            let p2 = parse_point(basis.dim(), &z2)?;
            let oracle = measure.measure()?.oracle(measure.grid())?;
            let g = build_moment(oracle, basis.clone())?;
            let f = factorize(&g)?;
            if let Some(samples) = plot_data {
                let mut text = String::from("t,re,im\n");
                for i in 0..samples {
                    let t = 2.0 * std::f64::consts::PI * i as f64 / samples as f64;
                    let mut moving = p1.clone();
                    moving[0] = Complex64::from_polar(1.0, t);
                    let val = opbasis::cd_kernel_eval(&f, level, &moving, &p2)?;
                    text.push_str(&format!("{t:.16e},{:.16e},{:.16e}\n", val.re, val.im));
                }
                emit(&out, &text)?;
            } else {
                let val = opbasis::cd_kernel_eval(&f, level, &p1, &p2)?;
                let abc = opbasis::abc_check(&f, &g, level, &p1, &p2)?;
                let v = serde_json::json!({
                    "level": level,
                    "z1": p1.iter().map(|c| complex_json(*c)).collect::<Vec<_>>(),
                    "z2": p2.iter().map(|c| complex_json(*c)).collect::<Vec<_>>(),
                    "kernel": complex_json(val),
                    "abc_residual": abc,
                });
                emit(&out, &to_json_string(&v)?)?;
            }
        }
        Command::Nice { poly, out } => {
            let v: serde_json::Value = serde_json::from_str(&poly)?;
            let p = LaurentPolynomial::from_json(&v)?;
            let report = p.is_nice()?;
            let oracle = p.nicety_oracle()?;
            let v = serde_json::json!({
                "nice": report.nice,
                "longitude": report.longitude,
                "oracle_agrees": oracle == report.nice,
                "deficient_orthant": report.deficient.as_ref().map(|d| d.to_string()),
                "witnesses": report.witnesses.iter().map(|(label, w)| serde_json::json!({
                    "orthant": label.to_string(),
                    "support_point": w.as_ref().map(|a| a.0.clone()),
                })).collect::<Vec<_>>(),
            });
            emit(&out, &to_json_string(&v)?)?;
        }
        Command::Darboux { measure, l_poly, k, seed, out } => {
            let basis = measure.basis();
            let weight = match &l_poly {
                Some(path) => {
                    let text = std::fs::read_to_string(path)?;
                    LaurentPolynomial::from_json(&serde_json::from_str(&text)?)?
                }
                None => paper_example_weight(),
            };
            let oracle = measure.measure()?.oracle(measure.grid())?;
            let g = build_moment(oracle, basis.clone())?;
            let f = factorize(&g)?;
            let nodes = darboux::sample_nodes(&weight, &f, k, seed)?;
            let th = darboux::transformed_quasitau(&f, &weight, &nodes, k)?;
            let coeffs = darboux::christoffel_numerator_coeffs(&f, &weight, &nodes, k)?;
            let mut rows = Vec::new();
            for r in 0..coeffs.nrows() {
                let numer = coeffs.row(r).transpose().into_owned();
                let (quot, rem) = darboux::laurent_divide_exact(&basis, &numer, &weight, k as u32)?;
                rows.push(serde_json::json!({
                    "coefficients": quot.to_json(),
                    "division_remainder": rem,
                }));
            }
            let v = serde_json::json!({
                "k": k,
                "seed": seed,
                "nodes": nodes.to_json(),
                "membership_defect": nodes.membership_defect(&weight)?,
                "t_phi": rows,
                "t_h": matrix_json(&th),
            });
            emit(&out, &to_json_string(&v)?)?;
        }
        Command::Toda { measure, times, check, h, out } => {
            let basis = measure.basis();
            let mut m = measure.measure()?;
            if let Some(path) = &times {
                let text = std::fs::read_to_string(path)?;
                let list: Vec<serde_json::Value> = serde_json::from_str(&text)?;
                for item in list {
                    let alpha: Vec<i64> = serde_json::from_value(item["alpha"].clone())?;
                    let re = item["re"].as_f64().unwrap_or(0.0);
                    let im = item["im"].as_f64().unwrap_or(0.0);
                    m = m.with_time(MultiIndex(alpha), Complex64::new(re, im));
                }
            }
            let state = toda::FlowState::new(basis.clone(), m, measure.grid())?;
            let e1 = MultiIndex::unit(basis.dim(), 1);
            let e2 = MultiIndex::unit(basis.dim(), basis.dim().min(2));
            let mut results = serde_json::Map::new();
            match check.as_str() {
                "lax" => {
                    results.insert(
                        "lax".into(),
                        serde_json::json!(toda::lax_residual(&state, &e1, &e2, h)?),
                    );
                }
                "zs" => {
                    results.insert(
                        "zakharov_shabat".into(),
                        serde_json::json!(toda::zakharov_shabat_residual(&state, &e1, &e2, h)?),
                    );
                }
                "toda" => {
                    for k in 1..basis.num_shells() - 1 {
                        results.insert(
                            format!("toda_k{k}"),
                            serde_json::json!(toda::toda_equation_residual(&state, 1, 1, k, h)?),
                        );
                    }
                }
                "first" => {
                    for k in 1..basis.num_shells() - 1 {
                        results.insert(
                            format!("dh_k{k}"),
                            serde_json::json!(toda::h_derivative_residual(&state, 1, k, h)?),
                        );
                        results.insert(
                            format!("dbeta_k{k}"),
                            serde_json::json!(toda::beta_derivative_residual(&state, 1, k, h)?),
                        );
                    }
                }
                "miwa" => {
                    let dim = basis.dim();
                    let vals: Vec<Complex64> = (0..4 * dim * dim)
                        .map(|i| {
                            Complex64::new(
                                (i as f64 * 0.37).sin() * 0.8 + 0.1,
                                (i as f64 * 0.61).cos() * 0.5,
                            )
                        })
                        .collect();
                    let n = nalgebra::DMatrix::from_row_slice(2 * dim, 2 * dim, &vals);
                    let z: Vec<Complex64> = (0..dim)
                        .map(|i| Complex64::from_polar(1.0 - 0.07 * i as f64, 0.81 + 0.4 * i as f64))
                        .collect();
                    for k in 1..basis.num_shells().min(4) - 1 {
                        results.insert(
                            format!("miwa_k{k}"),
                            serde_json::json!(toda::miwa_expression_residual(&state, &n, k, &z)?),
                        );
                    }
                }
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown check '{other}' (expected lax|zs|toda|first|miwa)"
                    )));
                }
            }
            let v = serde_json::json!({"check": check, "h": h, "residuals": results});
            emit(&out, &to_json_string(&v)?)?;
        }
        Command::Verify { preset, dim, trunc, out } => {
            let reports = match preset {
                None => verify::run_all()?,
                Some(p) => {
                    // preset baseline: structural identities for one measure
                    let basis = Arc::new(LongilexBasis::new(dim, trunc));
                    let measure = MeasureArgs { dim, trunc, weight: None, preset: Some(p) };
                    let oracle = measure.measure()?.oracle(measure.grid())?;
                    let g = build_moment(oracle, basis.clone())?;
                    let f = factorize(&g)?;
                    let mut rep = verify::CriterionReport {
                        id: 0,
                        name: "preset baseline".into(),
                        passed: true,
                        max_residual: 0.0,
                        tolerance: 1e-10,
                        details: vec![],
                    };
                    let checks: Vec<(&str, f64)> = vec![
                        ("reconstruction", f.reconstruction_residual(g.data())),
                        ("biorthogonality", opbasis::biorthogonality_residual(&f, &g)),
                        ("persymmetry", g.persymmetry_defect()),
                        ("hermitian", g.hermitian_defect()),
                    ];
                    for (label, r) in checks {
                        rep.passed &= r <= rep.tolerance;
                        rep.max_residual = rep.max_residual.max(r);
                        rep.details.push(format!("{label}: {r:.3e}"));
                    }
                    vec![rep]
                }
            };
            let mut all_pass = true;
            for r in &reports {
                all_pass &= r.passed;
                println!(
                    "criterion {:>2} [{}] {} (max residual {:.3e}, tol {:.1e})",
                    r.id,
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.max_residual,
                    r.tolerance
                );
            }
            let v = serde_json::json!({
                "all_passed": all_pass,
                "criteria": reports.iter().map(|r| serde_json::json!({
                    "id": r.id,
                    "name": r.name,
                    "passed": r.passed,
                    "max_residual": r.max_residual,
                    "tolerance": r.tolerance,
                    "details": r.details,
                })).collect::<Vec<_>>(),
            });
            if let Some(path) = &out {
                std::fs::write(path, to_json_string(&v)?)?;
            }
            if !all_pass {
                return Ok(1);
            }
        }
    }
    Ok(0)
}

fn main() {
    match run() {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            let v = serde_json::json!({"error": e.to_string()});
            let _ = writeln!(std::io::stderr(), "{v}");
            std::process::exit(2);
        }
    }
}
