//! TSPLIB `.tsp` reader and distance conventions.
//!
//! Supported weight kinds: `EUC_2D` (nearest integer), `CEIL_2D`, `ATT`
//! (pseudo-Euclidean), `GEO` (great circle, integer-truncated) and `EXPLICIT`
//! with `FULL_MATRIX`, `UPPER_ROW` or `LOWER_DIAG_ROW` layouts. Node labels are
//! re-based to `0..n`.

mod bundled;
mod optima;

use std::fs;
use std::path::Path;

use log::warn;
use thiserror::Error;

use crate::scalar::Scalar;
use crate::tsp::{DistanceMatrix, TspError};

pub use bundled::{bundled_instance, bundled_names, resolve_instance, TSPLIB_DIR_ENV};
pub use optima::{lookup_optimum, OptimaRegistry, ReferenceOptimum};

#[derive(Debug, Error)]
pub enum TsplibError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported weight kind: {0}")]
    UnsupportedWeightKind(String),
    #[error("expected {expected} data entries, found {found}")]
    RowCountMismatch { expected: usize, found: usize },
    #[error("bad numeric token {0:?}")]
    BadNumber(String),
    #[error(transparent)]
    Distance(#[from] TspError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightKind {
    Euclidean2dRounded,
    Ceiling2d,
    PseudoEuclidean,
    Geographic,
    ExplicitMatrix,
}

impl WeightKind {
    fn from_keyword(s: &str) -> Result<Self, TsplibError> {
        match s {
            "EUC_2D" => Ok(Self::Euclidean2dRounded),
            "CEIL_2D" => Ok(Self::Ceiling2d),
            "ATT" => Ok(Self::PseudoEuclidean),
            "GEO" => Ok(Self::Geographic),
            "EXPLICIT" => Ok(Self::ExplicitMatrix),
            other => Err(TsplibError::UnsupportedWeightKind(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum MatrixLayout {
    Full,
    UpperRow,
    LowerDiagRow,
}

/// A parsed TSPLIB problem.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub name: String,
    pub n: usize,
    pub weight_kind: WeightKind,
    /// `(x, y)` in file units, present for coordinate kinds.
    pub coords: Option<Vec<(f64, f64)>>,
    /// Row-major `n * n` table, present for `EXPLICIT`.
    pub explicit: Option<Vec<f64>>,
}

impl Instance {
    /// Coordinate instance built in memory.
    pub fn from_coords(name: &str, kind: WeightKind, coords: Vec<(f64, f64)>) -> Self {
        assert_ne!(kind, WeightKind::ExplicitMatrix);
        Self {
            name: name.to_string(),
            n: coords.len(),
            weight_kind: kind,
            coords: Some(coords),
            explicit: None,
        }
    }

    /// Distance matrix under the instance's TSPLIB convention.
    pub fn distance_matrix<T: Scalar>(&self) -> Result<DistanceMatrix<T>, TsplibError> {
        build_distance_matrix(self)
    }
}

pub fn parse_instance(path: impl AsRef<Path>) -> Result<Instance, TsplibError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| TsplibError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let fallback = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_instance_str(&text, &fallback)
}

/// Parses TSPLIB text. `fallback_name` is used when `NAME` is absent.
pub fn parse_instance_str(text: &str, fallback_name: &str) -> Result<Instance, TsplibError> {
    let mut name = None;
    let mut dimension = None;
    let mut kind = None;
    let mut layout = None;
    let mut coord_tokens: Option<Vec<String>> = None;
    let mut weight_tokens: Option<Vec<String>> = None;

    let mut lines = text.lines().peekable();
    while let Some(raw) = lines.next() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = match line.split_once(':') {
            Some((k, v)) => (k.trim(), v.trim()),
            None => (line, ""),
        };
        match key {
            "NAME" => name = Some(value.to_string()),
            "TYPE" => {
                if value != "TSP" {
                    return Err(TsplibError::UnsupportedWeightKind(format!(
                        "problem type {value}"
                    )));
                }
            }
            "DIMENSION" => {
                let n = value
                    .parse::<usize>()
                    .map_err(|_| TsplibError::MalformedHeader(format!("DIMENSION {value:?}")))?;
                dimension = Some(n);
            }
            "EDGE_WEIGHT_TYPE" => kind = Some(WeightKind::from_keyword(value)?),
            "EDGE_WEIGHT_FORMAT" => {
                layout = Some(match value {
                    "FULL_MATRIX" => MatrixLayout::Full,
                    "UPPER_ROW" => MatrixLayout::UpperRow,
                    "LOWER_DIAG_ROW" => MatrixLayout::LowerDiagRow,
                    "FUNCTION" => continue,
                    other => {
                        return Err(TsplibError::UnsupportedWeightKind(format!(
                            "EXPLICIT {other}"
                        )))
                    }
                })
            }
            "NODE_COORD_SECTION" => coord_tokens = Some(section_tokens(&mut lines)),
            "EDGE_WEIGHT_SECTION" => weight_tokens = Some(section_tokens(&mut lines)),
            "EOF" => break,
            "COMMENT" | "DISPLAY_DATA_TYPE" | "NODE_COORD_TYPE" => {}
            "DISPLAY_DATA_SECTION" | "TOUR_SECTION" | "FIXED_EDGES_SECTION" => {
                warn!("skipping TSPLIB section {key}");
                section_tokens(&mut lines);
            }
            other => warn!("skipping unknown TSPLIB keyword {other}"),
        }
    }

    let n = dimension.ok_or_else(|| TsplibError::MalformedHeader("missing DIMENSION".into()))?;
    if n < 3 {
        return Err(TsplibError::MalformedHeader(format!(
            "DIMENSION {n} is below 3"
        )));
    }
    let kind =
        kind.ok_or_else(|| TsplibError::MalformedHeader("missing EDGE_WEIGHT_TYPE".into()))?;
    let name = name.unwrap_or_else(|| fallback_name.to_string());

    let mut inst = Instance {
        name,
        n,
        weight_kind: kind,
        coords: None,
        explicit: None,
    };
    if kind == WeightKind::ExplicitMatrix {
        let layout = layout
            .ok_or_else(|| TsplibError::MalformedHeader("missing EDGE_WEIGHT_FORMAT".into()))?;
        let tokens = weight_tokens
            .ok_or_else(|| TsplibError::MalformedHeader("missing EDGE_WEIGHT_SECTION".into()))?;
        inst.explicit = Some(explicit_table(n, layout, &tokens)?);
    } else {
        let tokens = coord_tokens
            .ok_or_else(|| TsplibError::MalformedHeader("missing NODE_COORD_SECTION".into()))?;
        inst.coords = Some(coordinates(n, &tokens)?);
    }
    Ok(inst)
}

/// Collects whitespace tokens until the next keyword line.
fn section_tokens<'a, I>(lines: &mut std::iter::Peekable<I>) -> Vec<String>
where
    I: Iterator<Item = &'a str>,
{
    let mut out = Vec::new();
    while let Some(next) = lines.peek() {
        let t = next.trim();
        let starts_alpha = t.chars().next().is_some_and(|c| c.is_ascii_alphabetic());
        if starts_alpha {
            break;
        }
        out.extend(t.split_whitespace().map(str::to_string));
        lines.next();
    }
    out
}

fn number(tok: &str) -> Result<f64, TsplibError> {
    tok.parse::<f64>()
        .map_err(|_| TsplibError::BadNumber(tok.to_string()))
}

fn coordinates(n: usize, tokens: &[String]) -> Result<Vec<(f64, f64)>, TsplibError> {
    if tokens.len() % 3 != 0 || tokens.len() / 3 != n {
        return Err(TsplibError::RowCountMismatch {
            expected: n,
            found: tokens.len() / 3,
        });
    }
    let mut coords = vec![None; n];
    for row in tokens.chunks(3) {
        let label = row[0]
            .parse::<usize>()
            .map_err(|_| TsplibError::BadNumber(row[0].clone()))?;
        if label == 0 || label > n || coords[label - 1].is_some() {
            return Err(TsplibError::MalformedHeader(format!(
                "bad node label {label}"
            )));
        }
        let (x, y) = (number(&row[1])?, number(&row[2])?);
        if !x.is_finite() || !y.is_finite() {
            return Err(TsplibError::Distance(TspError::NonFinite {
                i: label - 1,
                j: label - 1,
            }));
        }
        coords[label - 1] = Some((x, y));
    }
    Ok(coords
        .into_iter()
        .map(|c| c.expect("all labels seen"))
        .collect())
}

fn explicit_table(
    n: usize,
    layout: MatrixLayout,
    tokens: &[String],
) -> Result<Vec<f64>, TsplibError> {
    let expected = match layout {
        MatrixLayout::Full => n * n,
        MatrixLayout::UpperRow => n * (n - 1) / 2,
        MatrixLayout::LowerDiagRow => n * (n + 1) / 2,
    };
    if tokens.len() != expected {
        return Err(TsplibError::RowCountMismatch {
            expected,
            found: tokens.len(),
        });
    }
    let values = tokens
        .iter()
        .map(|t| number(t))
        .collect::<Result<Vec<_>, _>>()?;
    let mut table = vec![0.0; n * n];
    let mut it = values.into_iter();
    match layout {
        MatrixLayout::Full => {
            for (slot, v) in table.iter_mut().zip(it) {
                *slot = v;
            }
        }
        MatrixLayout::UpperRow => {
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = it.next().expect("counted");
                    table[i * n + j] = v;
                    table[j * n + i] = v;
                }
            }
        }
        MatrixLayout::LowerDiagRow => {
            for i in 0..n {
                for j in 0..=i {
                    let v = it.next().expect("counted");
                    table[i * n + j] = v;
                    table[j * n + i] = v;
                }
            }
        }
    }
    Ok(table)
}

/// Builds the symmetric distance matrix using TSPLIB rounding conventions.
pub fn build_distance_matrix<T: Scalar>(inst: &Instance) -> Result<DistanceMatrix<T>, TsplibError> {
    let n = inst.n;
    let matrix = match inst.weight_kind {
        WeightKind::ExplicitMatrix => {
            let table = inst.explicit.as_ref().ok_or_else(|| {
                TsplibError::MalformedHeader("explicit instance without table".into())
            })?;
            // FULL_MATRIX tables may be slightly asymmetric; average the two halves.
            DistanceMatrix::from_fn(n, |i, j| T::of(0.5 * (table[i * n + j] + table[j * n + i])))?
        }
        kind => {
            let pts = inst.coords.as_ref().ok_or_else(|| {
                TsplibError::MalformedHeader("coordinate instance without coordinates".into())
            })?;
            if pts.len() != n {
                return Err(TsplibError::RowCountMismatch {
                    expected: n,
                    found: pts.len(),
                });
            }
            match kind {
                WeightKind::Euclidean2dRounded => {
                    DistanceMatrix::from_fn(n, |i, j| T::of(nint(euclid(pts[i], pts[j]))))?
                }
                WeightKind::Ceiling2d => {
                    DistanceMatrix::from_fn(n, |i, j| T::of(euclid(pts[i], pts[j]).ceil()))?
                }
                WeightKind::PseudoEuclidean => {
                    DistanceMatrix::from_fn(n, |i, j| T::of(att(pts[i], pts[j])))?
                }
                WeightKind::Geographic => {
                    let rad: Vec<(f64, f64)> = pts
                        .iter()
                        .map(|&(x, y)| (geo_radians(x), geo_radians(y)))
                        .collect();
                    DistanceMatrix::from_fn(n, |i, j| T::of(geo(rad[i], rad[j])))?
                }
                WeightKind::ExplicitMatrix => unreachable!(),
            }
        }
    };
    Ok(matrix)
}

pub(crate) fn euclid(p: (f64, f64), q: (f64, f64)) -> f64 {
    let (dx, dy) = (p.0 - q.0, p.1 - q.1);
    (dx * dx + dy * dy).sqrt()
}

fn nint(x: f64) -> f64 {
    (x + 0.5).floor()
}

fn att(p: (f64, f64), q: (f64, f64)) -> f64 {
    let (dx, dy) = (p.0 - q.0, p.1 - q.1);
    let r = ((dx * dx + dy * dy) / 10.0).sqrt();
    let t = nint(r);
    if t < r {
        t + 1.0
    } else {
        t
    }
}

const GEO_PI: f64 = 3.141592;
const EARTH_RADIUS: f64 = 6378.388;

/// `DDD.MM` degrees-and-minutes to radians.
fn geo_radians(x: f64) -> f64 {
    let deg = x.trunc();
    let min = x - deg;
    GEO_PI * (deg + 5.0 * min / 3.0) / 180.0
}

fn geo(p: (f64, f64), q: (f64, f64)) -> f64 {
    let q1 = (p.1 - q.1).cos();
    let q2 = (p.0 - q.0).cos();
    let q3 = (p.0 + q.0).cos();
    (EARTH_RADIUS * (0.5 * ((1.0 + q1) * q2 - (1.0 - q1) * q3)).acos() + 1.0).trunc()
}
