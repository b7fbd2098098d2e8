use std::fs;
use std::io::Write;
use std::path::Path;

use gmrf_core::io::{
    estimation_report_kv, format_field, format_moments, kl_report_kv, multi_estimation_report_kv,
    oracle_report_kv, parse_field, parse_moments, FieldData, KvReport, MomentsData, FIELD_MAGIC,
    MOMENTS_MAGIC,
};
use gmrf_core::*;
use nalgebra::DMatrix;

use crate::args::{EstimateArgs, KlArgs, ModelArgs, SimulateArgs, ValidateArgs};
use crate::CliError;

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone)]
enum Model {
    Scalar(ModelParams),
    Multi(MultiModelParams),
}

impl Model {
    fn dim(&self) -> usize {
        match self {
            Model::Scalar(_) => 1,
            Model::Multi(m) => m.dim(),
        }
    }
}

/// Parameter pieces from the command line, each optional.
struct ModelFlags<'a> {
    mu: Option<&'a [f64]>,
    sigma2: Option<f64>,
    sigma: Option<&'a [f64]>,
    beta: Option<f64>,
}

fn infer_dim(flags: &ModelFlags, dim: Option<usize>) -> CliResult<usize> {
    let from_mu = flags.mu.map(|m| m.len()).filter(|&n| n > 1);
    let from_sigma = match flags.sigma {
        Some(s) => {
            let d = (s.len() as f64).sqrt().round() as usize;
            if d * d != s.len() {
                return Err(CliError::usage(format!(
                    "--sigma needs d*d values, got {}",
                    s.len()
                )));
            }
            Some(d).filter(|&d| d > 1)
        }
        None => None,
    };
    let d = dim.or(from_mu).or(from_sigma).unwrap_or(1);
    if d == 0 {
        return Err(CliError::usage("--dim must be positive"));
    }
    Ok(d)
}

/// Builds a model of dimension `d`, filling unset pieces from `base`.
fn build_model(flags: &ModelFlags, d: usize, base: &Model) -> CliResult<Model> {
    if base.dim() != d {
        return Err(CliError::usage(format!(
            "parameters have dim {d}, data has dim {}",
            base.dim()
        )));
    }
    if let Some(mu) = flags.mu {
        if mu.len() != d && mu.len() != 1 {
            return Err(CliError::usage(format!(
                "--mu needs 1 or {d} values, got {}",
                mu.len()
            )));
        }
    }
    if let Some(s) = flags.sigma {
        if s.len() != d * d {
            return Err(CliError::usage(format!(
                "--sigma needs {} values, got {}",
                d * d,
                s.len()
            )));
        }
    }
    Ok(match base {
        Model::Scalar(b) => {
            let mu = flags.mu.map_or(b.mu(), |m| m[0]);
            let sigma2 = flags
                .sigma2
                .or(flags.sigma.map(|s| s[0]))
                .unwrap_or(b.sigma2());
            Model::Scalar(ModelParams::new(
                mu,
                sigma2,
                flags.beta.unwrap_or(b.beta()),
            )?)
        }
        Model::Multi(b) => {
            let mu = match flags.mu {
                Some(m) if m.len() == 1 => vec![m[0]; d],
                Some(m) => m.to_vec(),
                None => b.mu().as_slice().to_vec(),
            };
            let sigma = match (flags.sigma2, flags.sigma) {
                (Some(s2), _) => DMatrix::identity(d, d) * s2,
                (None, Some(s)) => DMatrix::from_row_slice(d, d, s),
                (None, None) => b.sigma().clone(),
            };
            Model::Multi(MultiModelParams::new(
                mu,
                sigma,
                flags.beta.unwrap_or(b.beta()),
            )?)
        }
    })
}

fn default_model(d: usize, mu: f64, sigma2: f64, beta: f64) -> CliResult<Model> {
    Ok(if d == 1 {
        Model::Scalar(ModelParams::new(mu, sigma2, beta)?)
    } else {
        Model::Multi(MultiModelParams::new(
            vec![mu; d],
            DMatrix::identity(d, d) * sigma2,
            beta,
        )?)
    })
}

fn model_from_args(a: &ModelArgs) -> CliResult<Model> {
    let flags = ModelFlags {
        mu: a.mu.as_deref(),
        sigma2: a.sigma2,
        sigma: a.sigma.as_deref(),
        beta: Some(a.beta),
    };
    let d = infer_dim(&flags, a.dim)?;
    build_model(&flags, d, &default_model(d, 0.0, 1.0, 0.0)?)
}

fn emit(text: &str, output: Option<&Path>) -> CliResult<()> {
    match output {
        Some(path) => {
            fs::write(path, text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
        }
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::usage(e.to_string())),
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn with_path(path: &Path) -> impl Fn(GmrfError) -> CliError + '_ {
    move |e| {
        let mut err = CliError::from(e);
        err.msg = format!("{}: {}", path.display(), err.msg);
        err
    }
}

pub fn simulate(a: SimulateArgs) -> CliResult<()> {
    let spec = NeighborhoodSpec::second_order();
    let model = model_from_args(&a.model)?;
    let mut cfg = SimConfig::new(a.height, a.width, a.sweeps, a.seed)
        .burn_in(a.burn_in)
        .allow_unstable(a.allow_unstable);
    if let Some(n) = a.snapshot_every {
        cfg = cfg.snapshot_every(n);
    }
    let (field, snapshots, sweeps_run): (FieldData, Vec<FieldData>, usize) = match &model {
        Model::Scalar(p) => {
            let s = gmrf_core::simulate(p, &cfg, &spec)?;
            (
                s.field.into(),
                s.snapshots.into_iter().map(Into::into).collect(),
                s.sweeps_run,
            )
        }
        Model::Multi(p) => {
            let s = simulate_multivariate(p, &cfg, &spec)?;
            (
                s.field.into(),
                s.snapshots.into_iter().map(Into::into).collect(),
                s.sweeps_run,
            )
        }
    };
    let summary = format!("seed={}\nsweeps={sweeps_run}\n", a.seed);
    match &a.output {
        Some(path) => {
            emit(&format_field(&field), Some(path))?;
            for (k, snap) in snapshots.iter().enumerate() {
                let snap_path = format!("{}.{k:04}", path.display());
                emit(&format_field(snap), Some(Path::new(&snap_path)))?;
            }
            print!("{summary}");
        }
        None => {
            emit(&format_field(&field), None)?;
            eprint!("{summary}");
        }
    }
    Ok(())
}

pub fn estimate(a: EstimateArgs) -> CliResult<()> {
    let spec = NeighborhoodSpec::second_order();
    let field = parse_field(&read_text(&a.input)?)
        .map_err(|e| CliError::usage(format!("{}: {e}", a.input.display())))?;
    if let Some(d) = a.dim {
        if d != field.dim() {
            return Err(CliError::usage(format!(
                "--dim {d} does not match file dim {}",
                field.dim()
            )));
        }
    }
    if let Some(mu) = &a.mu {
        if mu.len() != field.dim() {
            return Err(CliError::usage(format!(
                "--mu needs {} values, got {}",
                field.dim(),
                mu.len()
            )));
        }
    }
    let (report, moments) = match &field {
        FieldData::Scalar(f) => {
            let m = match &a.mu {
                Some(mu) => patch_moments_about(f, mu[0], &spec)?,
                None => patch_moments(f, &spec)?,
            };
            (
                estimation_report_kv(&estimate_params_from_moments(&m)?),
                MomentsData::Scalar(m),
            )
        }
        FieldData::Multi(f) => {
            let m = match &a.mu {
                Some(mu) => multi_patch_moments_about(f, mu, &spec)?,
                None => multi_patch_moments(f, &spec)?,
            };
            (
                multi_estimation_report_kv(&estimate_multi_params_from_moments(&m)?),
                MomentsData::Multi(m),
            )
        }
    };
    if let Some(path) = &a.moments_out {
        emit(&format_moments(&moments), Some(path))?;
    }
    emit(&report.to_string(), a.output.as_deref())
}

/// Moments plus the lattice shape when the input was a field.
struct KlInput {
    moments: MomentsData,
    shape: Option<(usize, usize)>,
}

fn read_kl_input(path: &Path) -> CliResult<KlInput> {
    let text = read_text(path)?;
    let magic = text.split_whitespace().next().unwrap_or("");
    let spec = NeighborhoodSpec::second_order();
    let bad = |e: GmrfError| CliError::usage(format!("{}: {e}", path.display()));
    if magic == FIELD_MAGIC {
        let field = parse_field(&text).map_err(bad)?;
        let shape = Some(field.shape());
        let moments = match &field {
            FieldData::Scalar(f) => {
                MomentsData::Scalar(patch_moments(f, &spec).map_err(with_path(path))?)
            }
            FieldData::Multi(f) => {
                MomentsData::Multi(multi_patch_moments(f, &spec).map_err(with_path(path))?)
            }
        };
        Ok(KlInput { moments, shape })
    } else if magic == MOMENTS_MAGIC {
        Ok(KlInput {
            moments: parse_moments(&text).map_err(bad)?,
            shape: None,
        })
    } else {
        Err(CliError::usage(format!(
            "{}: expected a {FIELD_MAGIC} or {MOMENTS_MAGIC} file",
            path.display()
        )))
    }
}

fn estimated_model(m: &MomentsData) -> gmrf_core::Result<Model> {
    Ok(match m {
        MomentsData::Scalar(m) => Model::Scalar(estimate_params_from_moments(m)?.params),
        MomentsData::Multi(m) => Model::Multi(estimate_multi_params_from_moments(m)?.params),
    })
}

pub fn kl(a: KlArgs) -> CliResult<()> {
    let p = read_kl_input(&a.p)?;
    let q = read_kl_input(&a.q)?;
    let d = p.moments.dim();
    if q.moments.dim() != d {
        return Err(CliError::usage(format!(
            "inputs have dims {d} and {}",
            q.moments.dim()
        )));
    }
    if let (Some(sp), Some(sq)) = (p.shape, q.shape) {
        if sp != sq {
            return Err(CliError::usage(format!(
                "lattice shapes differ: {}x{} vs {}x{}",
                sp.0, sp.1, sq.0, sq.1
            )));
        }
    }
    let flags_p = ModelFlags {
        mu: a.mu_p.as_deref(),
        sigma2: a.sigma2_p,
        sigma: a.sigma_p.as_deref(),
        beta: a.beta_p,
    };
    let flags_q = ModelFlags {
        mu: a.mu_q.as_deref(),
        sigma2: a.sigma2_q,
        sigma: a.sigma_q.as_deref(),
        beta: a.beta_q,
    };
    let model_p = build_model(
        &flags_p,
        d,
        &estimated_model(&p.moments).map_err(with_path(&a.p))?,
    )?;
    let model_q = build_model(
        &flags_q,
        d,
        &estimated_model(&q.moments).map_err(with_path(&a.q))?,
    )?;
    let report = match (model_p, model_q, p.moments, q.moments) {
        (
            Model::Scalar(pp),
            Model::Scalar(pq),
            MomentsData::Scalar(mp),
            MomentsData::Scalar(mq),
        ) => kl_univariate(&UniKLInputs::new(pp, pq, mp, mq))?,
        (Model::Multi(pp), Model::Multi(pq), MomentsData::Multi(mp), MomentsData::Multi(mq)) => {
            kl_multivariate(&MultiKLInputs::new(pp, pq, mp, mq).with_ridge(a.ridge))?
        }
        _ => unreachable!("dimensions checked above"),
    };
    let n_sites = p.shape.map(|(h, w)| h * w);
    emit(
        &kl_report_kv(&report, n_sites).to_string(),
        a.output.as_deref(),
    )
}

pub fn validate(a: ValidateArgs) -> CliResult<()> {
    if a.snapshots == 0 || a.thin == 0 {
        return Err(CliError::usage("--snapshots and --thin must be positive"));
    }
    let spec = NeighborhoodSpec::second_order();
    let flags_p = ModelFlags {
        mu: a.mu_p.as_deref(),
        sigma2: a.sigma2_p,
        sigma: a.sigma_p.as_deref(),
        beta: Some(a.beta_p),
    };
    let flags_q = ModelFlags {
        mu: a.mu_q.as_deref(),
        sigma2: a.sigma2_q,
        sigma: a.sigma_q.as_deref(),
        beta: Some(a.beta_q),
    };
    let d = match a.dim {
        Some(d) => d,
        None => infer_dim(&flags_p, None)?.max(infer_dim(&flags_q, None)?),
    };
    let p = build_model(&flags_p, d, &default_model(d, 0.0, 1.0, 0.0)?)?;
    let q = build_model(&flags_q, d, &default_model(d, 0.5, 1.5, 0.0)?)?;
    let cfg = SimConfig::new(a.height, a.width, a.snapshots * a.thin, a.seed)
        .burn_in(a.burn_in)
        .snapshot_every(a.thin)
        .allow_unstable(a.allow_unstable);
    let report = match (&p, &q) {
        (Model::Scalar(p), Model::Scalar(q)) => {
            let sim = gmrf_core::simulate(p, &cfg, &spec)?;
            mc_kl_univariate(&sim.snapshots, p, q, &spec)?
        }
        (Model::Multi(p), Model::Multi(q)) => {
            let sim = simulate_multivariate(p, &cfg, &spec)?;
            mc_kl_multivariate(&sim.snapshots, p, q, &spec)?
        }
        _ => unreachable!("both models built with dim {d}"),
    };
    let passed = report.within(a.tolerance);
    let mut kv: KvReport = oracle_report_kv(&report);
    kv.real("tolerance", a.tolerance)
        .int("seed", a.seed as usize)
        .text("passed", passed.to_string());
    emit(&kv.to_string(), a.output.as_deref())?;
    if passed {
        Ok(())
    } else {
        Err(CliError {
            code: 6,
            msg: format!(
                "relative error {:.3e} exceeds tolerance {:.3e}",
                report.relative_error, a.tolerance
            ),
        })
    }
}
