//! Plain-text formats.
//!
//! Field files:
//!
//! ```text
//! GMRF1 <height> <width> <dim>
//! <dim values of site (0,0)>
//! <dim values of site (0,1)>
//! ...
//! ```
//!
//! Moments files:
//!
//! ```text
//! GMRFMOM1 <dim> <n_samples>
//! <mean vector>
//! <dim rows of the centre covariance>
//! <9·dim rows of the patch covariance>
//! ```
//!
//! Reports are `key=value` lines. All reals are written with 17
//! significant digits so they read back bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::divergence::KLReport;
use crate::error::{GmrfError, Result};
use crate::estimation::{EstimationReport, MultiEstimationReport};
use crate::lattice::{LatticeField, MultiLatticeField, PATCH_LEN};
use crate::moments::{MultiPatchMoments, PatchMoments};
use crate::oracle::OracleReport;

pub const FIELD_MAGIC: &str = "GMRF1";
pub const MOMENTS_MAGIC: &str = "GMRFMOM1";

/// A real with 17 significant digits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldData {
    Scalar(LatticeField),
    Multi(MultiLatticeField),
}

impl FieldData {
    pub fn dim(&self) -> usize {
        match self {
            FieldData::Scalar(_) => 1,
            FieldData::Multi(f) => f.dim(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            FieldData::Scalar(f) => (f.height(), f.width()),
            FieldData::Multi(f) => (f.height(), f.width()),
        }
    }
}

impl From<LatticeField> for FieldData {
    fn from(f: LatticeField) -> Self {
        FieldData::Scalar(f)
    }
}

impl From<MultiLatticeField> for FieldData {
    fn from(f: MultiLatticeField) -> Self {
        match f.to_scalar() {
            Some(s) => FieldData::Scalar(s),
            None => FieldData::Multi(f),
        }
    }
}

fn push_row(out: &mut String, row: impl IntoIterator<Item = f64>) {
    let mut first = true;
    for v in row {
        if !first {
            out.push(' ');
        }
        out.push_str(&fmt_real(v));
        first = false;
    }
    out.push('\n');
}

pub fn format_field(field: &FieldData) -> String {
    let (h, w) = field.shape();
    let d = field.dim();
    let values = match field {
        FieldData::Scalar(f) => f.values(),
        FieldData::Multi(f) => f.values(),
    };
    let mut out = String::with_capacity(h * w * d * 24 + 32);
    writeln!(out, "{FIELD_MAGIC} {h} {w} {d}").unwrap();
    for site in values.chunks_exact(d) {
        push_row(&mut out, site.iter().copied());
    }
    out
}

fn parse_err(line: usize, msg: impl Into<String>) -> GmrfError {
    GmrfError::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_reals(line: &str, lineno: usize, expect: usize) -> Result<Vec<f64>> {
    let vals = line
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| parse_err(lineno, format!("bad real {t:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if vals.len() != expect {
        return Err(parse_err(
            lineno,
            format!("expected {expect} values, found {}", vals.len()),
        ));
    }
    Ok(vals)
}

fn parse_usize(tok: Option<&str>, lineno: usize, what: &str) -> Result<usize> {
    tok.ok_or_else(|| parse_err(lineno, format!("missing {what}")))?
        .parse()
        .map_err(|e| parse_err(lineno, format!("bad {what}: {e}")))
}

pub fn parse_field(text: &str) -> Result<FieldData> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty field file"))?;
    let mut tok = header.split_whitespace();
    if tok.next() != Some(FIELD_MAGIC) {
        return Err(parse_err(1, format!("expected {FIELD_MAGIC} header")));
    }
    let h = parse_usize(tok.next(), 1, "height")?;
    let w = parse_usize(tok.next(), 1, "width")?;
    let d = parse_usize(tok.next(), 1, "dim")?;
    if tok.next().is_some() {
        return Err(parse_err(1, "trailing tokens in header"));
    }
    if d == 0 {
        return Err(parse_err(1, "dim must be positive"));
    }
    let mut values = Vec::with_capacity(h * w * d);
    for _ in 0..h * w {
        let (no, line) = lines
            .next()
            .ok_or_else(|| parse_err(values.len() / d + 2, "unexpected end of file"))?;
        values.extend(parse_reals(line, no, d)?);
    }
    if let Some((no, line)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(parse_err(no, format!("unexpected trailing data {line:?}")));
    }
    Ok(MultiLatticeField::new(h, w, d, values)?.into())
}

pub fn read_field_file(path: impl AsRef<Path>) -> Result<FieldData> {
    parse_field(&std::fs::read_to_string(path)?)
}

pub fn write_field_file(path: impl AsRef<Path>, field: &FieldData) -> Result<()> {
    std::fs::write(path, format_field(field))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum MomentsData {
    Scalar(PatchMoments),
    Multi(MultiPatchMoments),
}

impl MomentsData {
    pub fn dim(&self) -> usize {
        match self {
            MomentsData::Scalar(_) => 1,
            MomentsData::Multi(m) => m.dim,
        }
    }
}

pub fn format_moments(moments: &MomentsData) -> String {
    let m = match moments {
        MomentsData::Scalar(m) => m.to_multi(),
        MomentsData::Multi(m) => m.clone(),
    };
    let d = m.dim;
    let mut out = String::new();
    writeln!(out, "{MOMENTS_MAGIC} {d} {}", m.n_samples).unwrap();
    push_row(&mut out, m.mean.iter().copied());
    for i in 0..d {
        push_row(&mut out, (0..d).map(|j| m.sigma[(i, j)]));
    }
    let l = PATCH_LEN * d;
    for i in 0..l {
        push_row(&mut out, (0..l).map(|j| m.sigma_p[(i, j)]));
    }
    out
}

pub fn parse_moments(text: &str) -> Result<MomentsData> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty moments file"))?;
    let mut tok = header.split_whitespace();
    if tok.next() != Some(MOMENTS_MAGIC) {
        return Err(parse_err(1, format!("expected {MOMENTS_MAGIC} header")));
    }
    let d = parse_usize(tok.next(), 1, "dim")?;
    let n = parse_usize(tok.next(), 1, "n_samples")?;
    if d == 0 {
        return Err(parse_err(1, "dim must be positive"));
    }
    let mut next = |expect: usize| -> Result<Vec<f64>> {
        let (no, line) = lines
            .next()
            .ok_or_else(|| parse_err(0, "unexpected end of file"))?;
        parse_reals(line, no, expect)
    };
    let mean = DVector::from_vec(next(d)?);
    let mut sigma = Vec::with_capacity(d * d);
    for _ in 0..d {
        sigma.extend(next(d)?);
    }
    let l = PATCH_LEN * d;
    let mut sp = Vec::with_capacity(l * l);
    for _ in 0..l {
        sp.extend(next(l)?);
    }
    let m = MultiPatchMoments::from_sigma_p(mean, DMatrix::from_row_slice(l, l, &sp), n)?;
    if m.sigma != DMatrix::from_row_slice(d, d, &sigma) {
        return Err(parse_err(
            3,
            "centre covariance does not match the patch covariance",
        ));
    }
    Ok(if d == 1 {
        let mut s = [[0.0; 9]; 9];
        for (a, row) in s.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                *v = m.sigma_p[(a, b)];
            }
        }
        MomentsData::Scalar(PatchMoments::from_sigma_p(m.mean[0], s, n)?)
    } else {
        MomentsData::Multi(m)
    })
}

pub fn read_moments_file(path: impl AsRef<Path>) -> Result<MomentsData> {
    parse_moments(&std::fs::read_to_string(path)?)
}

/// Ordered `key=value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvReport {
    entries: Vec<(String, String)>,
}

impl KvReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn real(&mut self, key: impl Into<String>, v: f64) -> &mut Self {
        self.entries.push((key.into(), fmt_real(v)));
        self
    }

    pub fn reals(
        &mut self,
        key: impl Into<String>,
        vs: impl IntoIterator<Item = f64>,
    ) -> &mut Self {
        let s: Vec<String> = vs.into_iter().map(fmt_real).collect();
        self.entries.push((key.into(), s.join(" ")));
        self
    }

    pub fn int(&mut self, key: impl Into<String>, v: usize) -> &mut Self {
        self.entries.push((key.into(), v.to_string()));
        self
    }

    pub fn text(&mut self, key: impl Into<String>, v: impl Into<String>) -> &mut Self {
        self.entries.push((key.into(), v.into()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_real(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse_err(i + 1, format!("expected key=value, got {line:?}")))?;
            entries.push((k.to_string(), v.to_string()));
        }
        Ok(KvReport { entries })
    }
}

impl std::fmt::Display for KvReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// `mu`, `sigma2`, `beta`, the β̂ ratio parts and the site count.
pub fn estimation_report_kv(r: &EstimationReport) -> KvReport {
    let mut kv = KvReport::new();
    kv.int("dim", 1)
        .real("mu", r.params.mu())
        .real("sigma2", r.params.sigma2())
        .real("beta", r.params.beta())
        .real("numerator", r.numerator)
        .real("denominator", r.denominator)
        .int("n_sites", r.n_sites);
    kv
}

/// Like [`estimation_report_kv`] with `mu` as a list and Σ as `sigma.<i>` rows.
pub fn multi_estimation_report_kv(r: &MultiEstimationReport) -> KvReport {
    let d = r.params.dim();
    let mut kv = KvReport::new();
    kv.int("dim", d).reals("mu", r.params.mu().iter().copied());
    for i in 0..d {
        kv.reals(
            format!("sigma.{i}"),
            r.params.sigma().row(i).iter().copied(),
        );
    }
    kv.real("beta", r.params.beta())
        .real("numerator", r.numerator)
        .real("denominator", r.denominator)
        .int("n_sites", r.n_sites);
    kv
}

/// Per-site divergences, their additive terms and, for vector sites, the
/// trace sums. With `n_sites` the whole-field totals are appended.
pub fn kl_report_kv(r: &KLReport, n_sites: Option<usize>) -> KvReport {
    let mut kv = KvReport::new();
    kv.real("d_pq", r.d_pq)
        .real("d_qp", r.d_qp)
        .real("d_sym", r.d_sym);
    for (dir, t) in [("pq", &r.pq), ("qp", &r.qp)] {
        kv.real(format!("{dir}.log_ratio"), t.log_ratio)
            .real(format!("{dir}.a_term"), t.a_term)
            .real(format!("{dir}.b_term"), t.b_term)
            .real(format!("{dir}.mean_shift"), t.mean_shift);
    }
    if let Some((a, b)) = &r.traces {
        for (dir, t) in [("pq", a), ("qp", b)] {
            kv.real(format!("{dir}.trace.own_center"), t.own_center)
                .real(format!("{dir}.trace.own_cross"), t.own_cross)
                .real(format!("{dir}.trace.own_neighbors"), t.own_neighbors)
                .real(format!("{dir}.trace.other_center"), t.other_center)
                .real(format!("{dir}.trace.other_cross"), t.other_cross)
                .real(format!("{dir}.trace.other_neighbors"), t.other_neighbors)
                .real(format!("{dir}.trace.mahalanobis"), t.mahalanobis);
        }
    }
    if let Some(n) = n_sites {
        let (pq, qp, sym) = r.field_totals(n);
        kv.int("n_sites", n)
            .real("total.d_pq", pq)
            .real("total.d_qp", qp)
            .real("total.d_sym", sym);
    }
    kv
}

pub fn oracle_report_kv(r: &OracleReport) -> KvReport {
    let mut kv = KvReport::new();
    kv.real("mc_estimate", r.mc_estimate)
        .real("mc_stderr", r.mc_stderr)
        .real("closed_form", r.closed_form)
        .real("relative_error", r.relative_error)
        .int("n_samples", r.n_samples)
        .int("n_sites", r.n_sites);
    kv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::NeighborhoodSpec;
    use crate::moments::{multi_patch_moments, patch_moments};
    use proptest::prelude::*;

    #[test]
    fn header_and_line_count() {
        let f = LatticeField::from_fn(3, 4, |r, c| r as f64 - 0.1 * c as f64).unwrap();
        let text = format_field(&f.clone().into());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "GMRF1 3 4 1");
        assert_eq!(lines.len(), 13);
        assert_eq!(parse_field(&text).unwrap(), FieldData::Scalar(f));
    }

    #[test]
    fn malformed_fields() {
        assert!(parse_field("").is_err());
        assert!(parse_field("GMRF2 3 3 1\n").is_err());
        assert!(parse_field("GMRF1 3 3 1\n1\n2\n").is_err());
        let mut ok = String::from("GMRF1 3 3 2\n");
        for _ in 0..9 {
            ok.push_str("1 2\n");
        }
        assert!(matches!(parse_field(&ok).unwrap(), FieldData::Multi(_)));
        assert!(parse_field(&(ok.clone() + "5 5\n")).is_err());
        assert!(parse_field(&ok.replace("1 2\n", "1\n")).is_err());
        assert!(parse_field(&ok.replacen("1 2", "1 x", 1)).is_err());
    }

    #[test]
    fn moments_round_trip() {
        let spec = NeighborhoodSpec::second_order();
        let f = LatticeField::from_fn(5, 6, |r, c| ((r * 7 + c * 3) % 5) as f64 * 0.37).unwrap();
        let m = MomentsData::Scalar(patch_moments(&f, &spec).unwrap());
        assert_eq!(parse_moments(&format_moments(&m)).unwrap(), m);
        let mf = MultiLatticeField::from_fn(4, 5, 2, |r, c| {
            vec![(r * c) as f64 / 3.0, (r + 2 * c) as f64 % 3.0]
        })
        .unwrap();
        let mm = MomentsData::Multi(multi_patch_moments(&mf, &spec).unwrap());
        let text = format_moments(&mm);
        assert!(text.starts_with("GMRFMOM1 2 20\n"));
        assert_eq!(parse_moments(&text).unwrap(), mm);
        assert!(parse_moments("GMRF1 3 3 1").is_err());
    }

    #[test]
    fn kv_report_format() {
        let mut r = KvReport::new();
        r.real("beta", 0.1)
            .int("n_sites", 16)
            .text("kind", "scalar");
        let s = r.to_string();
        assert_eq!(s, "beta=1.0000000000000001e-1\nn_sites=16\nkind=scalar\n");
        let back = KvReport::parse(&s).unwrap();
        assert_eq!(back.get_real("beta"), Some(0.1));
        assert_eq!(back, r);
    }

    #[test]
    fn kl_report_keys() {
        use crate::divergence::{kl_multivariate, MultiKLInputs};
        use crate::params::MultiModelParams;
        let p = MultiModelParams::new(vec![0.0, 1.0], DMatrix::identity(2, 2), 0.05).unwrap();
        let q = MultiModelParams::new(vec![0.5, 1.0], DMatrix::identity(2, 2) * 2.0, 0.0).unwrap();
        let mp = MultiPatchMoments::independent(p.mu().clone(), p.sigma()).unwrap();
        let mq = MultiPatchMoments::independent(q.mu().clone(), q.sigma()).unwrap();
        let r = kl_multivariate(&MultiKLInputs::new(p, q, mp, mq)).unwrap();
        let kv = KvReport::parse(&kl_report_kv(&r, Some(10)).to_string()).unwrap();
        assert_eq!(kv.get_real("d_sym"), Some(r.d_sym));
        assert_eq!(kv.get_real("total.d_pq"), Some(10.0 * r.d_pq));
        assert!(kv.get("qp.trace.mahalanobis").is_some());
    }

    proptest! {
        #[test]
        fn reals_round_trip_exactly(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(fmt_real(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }

        #[test]
        fn field_text_round_trip(vals in proptest::collection::vec(-1e6f64..1e6, 12)) {
            let f = MultiLatticeField::new(3, 4, 1, vals).unwrap();
            let data: FieldData = f.into();
            prop_assert_eq!(parse_field(&format_field(&data)).unwrap(), data);
        }
    }
}
