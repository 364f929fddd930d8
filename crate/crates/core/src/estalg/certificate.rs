use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::critical::{critical_point_search, lex, CriticalPoint};
use super::qseq::q_sequence;
use super::system::FilteringSystem;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::symb::{Evaluator, Expr};

/// Relative gap under which two candidate values of `|H_i|` count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    InfiniteDimensional,
    RankDeficient,
}

#[derive(Clone, Debug)]
pub struct Certificate {
    /// Observation index `j`.
    pub observation: usize,
    pub n: usize,
    /// `H_0 = h^j, …, H_{n−1}`.
    pub fields: Vec<Expr>,
    /// `x_i`, a critical point of `H_i`.
    pub points: Vec<Point>,
    /// `A[i][k] = H_i(x_k)`.
    pub matrix: Vec<Vec<f64>>,
    pub min_abs_diagonal: f64,
    pub max_abs_below_diagonal: f64,
    pub determinant: f64,
    pub verdict: Verdict,
}

/// The critical point of largest `|f|`, ties broken by lexicographic
/// coordinate order.
fn select(points: &[CriticalPoint]) -> Option<&CriticalPoint> {
    let best = points.iter().map(|c| c.value.abs()).fold(0.0f64, f64::max);
    points
        .iter()
        .filter(|c| c.value.abs() >= best * (1.0 - TIE_TOLERANCE))
        .min_by(|a, b| lex(&a.point, &b.point))
}

/// Evaluates `H_i` at critical points `x_i` of `H_i` and checks that
/// `A[i][k] = H_i(x_k)` is upper triangular with a nonzero diagonal.
pub fn certificate_compact(sys: &FilteringSystem, j: usize, n: usize) -> Result<Certificate> {
    let chart = sys.chart();
    if !chart.is_compact() {
        return Err(Error::NotCompact(chart.name().into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("certificate depth must be positive".into()));
    }
    let tol = sys.tolerances();
    let fields = q_sequence(sys, j, n - 1)?;
    let mut points = Vec::with_capacity(n);
    for (i, f) in fields.iter().enumerate() {
        let search = critical_point_search(f, sys.metric(), tol, None)?;
        let best = select(&search.points);
        match best {
            Some(c) if c.value.abs() > tol.diag => points.push(c.point.clone()),
            _ => {
                return Err(Error::CertificateFailure {
                    row: i,
                    col: i,
                    value: best.map_or(0.0, |c| c.value),
                    reason: "no critical point with a nonzero value",
                })
            }
        }
    }
    let mut ev = Evaluator::new(&fields);
    let mut matrix = alloc::vec![alloc::vec![0.0; n]; n];
    for (k, p) in points.iter().enumerate() {
        for (i, v) in ev.eval(p)?.iter().enumerate() {
            matrix[i][k] = *v;
        }
    }
    let mut max_below = 0.0f64;
    let mut min_diag = f64::INFINITY;
    for i in 0..n {
        for k in 0..i {
            let v = matrix[i][k];
            if !(v.abs() < tol.tri) {
                return Err(Error::CertificateFailure {
                    row: i,
                    col: k,
                    value: v,
                    reason: "entry below the diagonal is not zero",
                });
            }
            max_below = max_below.max(v.abs());
        }
        let d = matrix[i][i];
        if !(d.abs() > tol.diag) {
            return Err(Error::CertificateFailure {
                row: i,
                col: i,
                value: d,
                reason: "diagonal entry vanishes",
            });
        }
        min_diag = min_diag.min(d.abs());
    }
    let flat: Vec<f64> = matrix.iter().flatten().copied().collect();
    let determinant = DMatrix::from_row_slice(n, n, &flat).determinant();
    Ok(Certificate {
        observation: j,
        n,
        fields,
        points,
        matrix,
        min_abs_diagonal: min_diag,
        max_abs_below_diagonal: max_below,
        determinant,
        verdict: Verdict::InfiniteDimensional,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Chart, Metric, VectorField};
    use crate::symb::parse;
    use crate::tol::Tolerances;
    use core::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn circle_sys(h: &str) -> FilteringSystem {
        let tol = Tolerances::default();
        let c = Chart::circle(&tol);
        let h = parse(h, c.names()).unwrap();
        FilteringSystem::new(Metric::flat(c), VectorField::zero(1), alloc::vec![h], tol).unwrap()
    }

    #[test]
    fn cosine_depth_three() {
        let cert = certificate_compact(&circle_sys("cos(theta)"), 0, 3).unwrap();
        let want_pts = [0.0, FRAC_PI_2, FRAC_PI_4];
        for (p, w) in cert.points.iter().zip(want_pts) {
            assert!((p[0] - w).abs() < 1e-9, "{p:?}");
        }
        let half = 0.5f64.sqrt();
        let want = [[1.0, 0.0, half], [0.0, 1.0, 0.5], [0.0, 0.0, 1.0]];
        for i in 0..3 {
            for k in 0..3 {
                assert!((cert.matrix[i][k] - want[i][k]).abs() < 1e-9);
            }
        }
        assert!((cert.determinant - 1.0).abs() < 1e-9);
        assert_eq!(cert.verdict, Verdict::InfiniteDimensional);
    }

    #[test]
    fn cosine_depth_five() {
        let cert = certificate_compact(&circle_sys("cos(theta)"), 0, 5).unwrap();
        assert!(cert.max_abs_below_diagonal < 1e-8);
        assert!(cert.min_abs_diagonal > 0.1);
        assert!((cert.matrix[4][4] - 256.0).abs() < 1e-6, "{:?}", cert.matrix);
    }

    #[test]
    fn depth_one() {
        let cert = certificate_compact(&circle_sys("cos(theta)"), 0, 1).unwrap();
        assert_eq!(cert.matrix, alloc::vec![alloc::vec![1.0]]);
    }

    #[test]
    fn constant_observation() {
        assert_eq!(
            certificate_compact(&circle_sys("3"), 0, 3).unwrap_err(),
            Error::ConstantObservation(0)
        );
    }

    #[test]
    fn line_is_not_compact() {
        let tol = Tolerances::default();
        let r = Chart::euclidean(1, 10.0, &tol).unwrap();
        let sys = FilteringSystem::new(Metric::flat(r), VectorField::zero(1), alloc::vec![Expr::coord(0)], tol).unwrap();
        assert!(matches!(certificate_compact(&sys, 0, 2), Err(Error::NotCompact(_))));
    }
}
