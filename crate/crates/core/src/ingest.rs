//! OR-Library moment files, scenario files and Monte Carlo scenario
//! generation.
//!
//! Scenario sampling draws uniforms from ChaCha20 (`rand_chacha`, seeded
//! with `seed_from_u64`) and maps pairs of them to standard normals with the
//! Box–Muller transform. A run is a pure function of `(moments, S, seed)`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// Mean vector and covariance matrix of asset returns.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentData {
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
}

impl MomentData {
    pub fn new(mu: Vec<f64>, sigma: Vec<Vec<f64>>) -> Result<Self> {
        let n = mu.len();
        if sigma.len() != n || sigma.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInstance(format!("covariance is not {n} × {n}")));
        }
        for i in 0..n {
            if !(sigma[i][i] >= 0.0) {
                return Err(Error::InvalidInstance(format!("negative variance for asset {}", i + 1)));
            }
            for j in 0..i {
                if (sigma[i][j] - sigma[j][i]).abs() > 1e-10 {
                    return Err(Error::InvalidInstance(format!(
                        "covariance not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        if mu.iter().chain(sigma.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInstance("non-finite moment data".into()));
        }
        Ok(MomentData { mu, sigma })
    }

    pub fn n_assets(&self) -> usize {
        self.mu.len()
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn numbers(line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| parse_err(lineno, format!("bad number {t:?}"))))
        .collect()
}

/// Non-blank lines with their 1-based line numbers; `\r` is stripped.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r').trim()))
        .filter(|(_, l)| !l.is_empty())
}

/// Parses the OR-Library portfolio layout:
///
/// ```text
/// N
/// mean_1 stddev_1
/// ...
/// mean_N stddev_N
/// i j corr_ij        (1-based, every pair with i ≤ j)
/// ```
///
/// Means and standard deviations are multiplied by `scale` before the
/// covariance is assembled.
pub fn parse_orlibrary(text: &str, scale: f64) -> Result<MomentData> {
    let mut lines = content_lines(text);
    let (l0, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let n: usize = header
        .parse()
        .map_err(|_| parse_err(l0, format!("expected asset count, found {header:?}")))?;
    if n == 0 {
        return Err(parse_err(l0, "asset count must be positive"));
    }
    let mut mu = Vec::with_capacity(n);
    let mut sd = Vec::with_capacity(n);
    for i in 0..n {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| parse_err(l0 + i + 1, format!("missing mean/stddev line for asset {}", i + 1)))?;
        let v = numbers(line, ln)?;
        if v.len() != 2 {
            return Err(parse_err(ln, format!("expected 2 values, found {}", v.len())));
        }
        if v[1] < 0.0 {
            return Err(parse_err(ln, "negative standard deviation"));
        }
        mu.push(v[0] * scale);
        sd.push(v[1] * scale);
    }
    let mut corr: Vec<Vec<Option<f64>>> = vec![vec![None; n]; n];
    let mut last_line = l0 + n;
    for (ln, line) in lines {
        last_line = ln;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(parse_err(ln, format!("expected \"i j corr\", found {line:?}")));
        }
        let idx = |t: &str| -> Result<usize> {
            match t.parse::<usize>() {
                Ok(v) if (1..=n).contains(&v) => Ok(v - 1),
                _ => Err(parse_err(ln, format!("asset index {t:?} outside 1..={n}"))),
            }
        };
        let (i, j) = (idx(toks[0])?, idx(toks[1])?);
        let c: f64 = toks[2]
            .parse()
            .map_err(|_| parse_err(ln, format!("bad correlation {:?}", toks[2])))?;
        if !(c.abs() <= 1.0 + 1e-9) {
            return Err(parse_err(ln, format!("correlation {c} outside [-1, 1]")));
        }
        let (i, j) = (i.min(j), i.max(j));
        corr[i][j] = Some(c);
    }
    let mut sigma = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let c = corr[i][j].ok_or_else(|| {
                parse_err(last_line, format!("missing correlation for pair ({}, {})", i + 1, j + 1))
            })?;
            sigma[i][j] = c * sd[i] * sd[j];
            sigma[j][i] = sigma[i][j];
        }
    }
    MomentData::new(mu, sigma)
}

/// Writes the OR-Library layout read by [`parse_orlibrary`] (unscaled).
pub fn write_orlibrary(m: &MomentData) -> String {
    let n = m.n_assets();
    let sd: Vec<f64> = (0..n).map(|i| m.sigma[i][i].sqrt()).collect();
    let mut out = format!("{n}\n");
    for i in 0..n {
        let _ = writeln!(out, "{} {}", m.mu[i], sd[i]);
    }
    for i in 0..n {
        for j in i..n {
            let c = if i == j {
                1.0
            } else if sd[i] > 0.0 && sd[j] > 0.0 {
                (m.sigma[i][j] / (sd[i] * sd[j])).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            let _ = writeln!(out, "{} {} {}", i + 1, j + 1, c);
        }
    }
    out
}

const JITTER: [f64; 4] = [0.0, 1e-12, 1e-10, 1e-8];

/// Lower Cholesky factor of `sigma + jitter·I`, with the jitter escalating
/// through `0, 1e-12, 1e-10, 1e-8` until the factorization succeeds.
///
/// Assets whose row and column of `sigma` are identically zero are riskless
/// and get a zero row in `L` without jitter.
pub fn cholesky(sigma: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = sigma.len();
    let active: Vec<usize> = (0..n).filter(|&i| sigma[i].iter().any(|&v| v != 0.0)).collect();
    let na = active.len();
    let base = DMatrix::from_fn(na, na, |i, j| sigma[active[i]][active[j]]);
    for &jitter in &JITTER {
        let mut m = base.clone();
        for i in 0..na {
            m[(i, i)] += jitter;
        }
        if let Some(ch) = m.cholesky() {
            if jitter > 0.0 {
                log::warn!("covariance needed diagonal jitter {jitter:e} to factor");
            }
            let l = ch.l();
            let mut out = vec![vec![0.0; n]; n];
            for (a, &i) in active.iter().enumerate() {
                for (b, &j) in active.iter().enumerate().take(a + 1) {
                    out[i][j] = l[(a, b)];
                }
            }
            return Ok(out);
        }
    }
    Err(Error::NotPositiveSemidefinite { jitter: JITTER[JITTER.len() - 1] })
}

/// Standard normal stream: ChaCha20 uniforms through Box–Muller.
struct Normals {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl Normals {
    fn new(seed: u64) -> Self {
        Normals { rng: ChaCha20Rng::seed_from_u64(seed), spare: None }
    }

    /// Uniform on (0, 1] with 53 random bits.
    fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn next(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let t = 2.0 * PI * u2;
        self.spare = Some(r * t.sin());
        r * t.cos()
    }
}

/// Draws `s` scenarios `μ + L g` with `g` standard normal.
pub fn generate_scenarios(moments: &MomentData, s: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if s == 0 {
        return Err(Error::Parameter("scenario count must be positive".into()));
    }
    let n = moments.n_assets();
    let l = cholesky(&moments.sigma)?;
    let mut normals = Normals::new(seed);
    let mut g = vec![0.0; n];
    let mut out = Vec::with_capacity(s);
    for _ in 0..s {
        for v in g.iter_mut() {
            *v = normals.next();
        }
        let row: Vec<f64> = (0..n)
            .map(|i| moments.mu[i] + (0..=i).map(|j| l[i][j] * g[j]).sum::<f64>())
            .collect();
        out.push(row);
    }
    Ok(out)
}

/// Parses `S N` followed by `S` rows of `N` returns; probabilities are
/// uniform.
pub fn parse_scenarios(text: &str) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut lines = content_lines(text);
    let (l0, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>().map_err(|_| parse_err(l0, format!("bad dimension {t:?}"))))
        .collect::<Result<_>>()?;
    let [s, n] = dims[..] else {
        return Err(parse_err(l0, "expected header \"S N\""));
    };
    if s == 0 || n == 0 {
        return Err(parse_err(l0, "dimensions must be positive"));
    }
    let mut rows = Vec::with_capacity(s);
    let mut last = l0;
    for (ln, line) in lines {
        last = ln;
        if rows.len() == s {
            return Err(parse_err(ln, format!("more than {s} scenario rows")));
        }
        let v = numbers(line, ln)?;
        if v.len() != n {
            return Err(parse_err(ln, format!("expected {n} returns, found {}", v.len())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(parse_err(ln, "non-finite return"));
        }
        rows.push(v);
    }
    if rows.len() != s {
        return Err(parse_err(last, format!("expected {s} scenario rows, found {}", rows.len())));
    }
    Ok((rows, crate::model::uniform_probs(s)))
}

/// Writes the layout read by [`parse_scenarios`]. Values use the shortest
/// representation that round-trips exactly.
pub fn write_scenarios(rows: &[Vec<f64>]) -> String {
    let n = rows.first().map_or(0, Vec::len);
    let mut out = String::with_capacity(rows.len() * n * 12 + 16);
    let _ = writeln!(out, "{} {}", rows.len(), n);
    for row in rows {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

/// Random moment data from a three-factor model resembling monthly equity
/// portfolio returns in percent (means about 0.6–1.4, standard deviations
/// about 3–8). Used for synthetic benchmark and test instances.
pub fn synthetic_moments(n: usize, seed: u64) -> MomentData {
    // market, size and value factors, monthly percent returns
    const FACTOR_SD: [f64; 3] = [4.5, 2.0, 1.5];
    let mut rng = Normals::new(seed);
    let loadings: Vec<[f64; 3]> = (0..n)
        .map(|_| [0.6 + 0.8 * rng.uniform(), 0.6 * rng.next(), 0.6 * rng.next()])
        .collect();
    let mu: Vec<f64> = loadings.iter().map(|b| 0.3 + 0.5 * b[0] + 0.4 * rng.uniform()).collect();
    let idio: Vec<f64> = (0..n).map(|_| (1.5 + 2.0 * rng.uniform()).powi(2)).collect();
    let mut sigma = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let c: f64 = (0..3).map(|f| loadings[i][f] * loadings[j][f] * FACTOR_SD[f].powi(2)).sum();
            sigma[i][j] = c + if i == j { idio[i] } else { 0.0 };
            sigma[j][i] = sigma[i][j];
        }
    }
    MomentData { mu, sigma }
}
