use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_traits::Float;

use super::system::FilteringSystem;
use crate::diffop::{DiffOp, MultiIndex, Order};
use crate::error::Result;
use crate::geometry::{Chart, Point};
use crate::rng::{streams, CounterRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProbeSettings {
    pub max_dim: usize,
    pub max_rounds: usize,
    /// Seed of the random evaluation points.
    pub seed: u64,
    /// Number of evaluation points per multi-index.
    pub samples: usize,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        ProbeSettings {
            max_dim: 16,
            max_rounds: 6,
            seed: 0,
            samples: 128,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    Dimension,
    Rounds,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeStatus {
    Closed { dimension: usize },
    ExceededBound { bound: usize, reached: usize, kind: Bound },
}

#[derive(Clone, Debug)]
pub struct BasisElement {
    pub label: String,
    pub op: DiffOp,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BracketLogEntry {
    pub round: usize,
    pub left: usize,
    pub right: usize,
    pub order: Order,
    /// Relative distance of the bracket from the span of the basis.
    pub residual: f64,
    pub added: bool,
    /// Numerical rank of the basis after this step.
    pub rank: usize,
}

#[derive(Clone, Debug)]
pub struct ProbeResult {
    pub status: ProbeStatus,
    pub basis: Vec<BasisElement>,
    pub log: Vec<BracketLogEntry>,
    pub rounds: usize,
}

impl ProbeResult {
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    pub fn is_closed(&self) -> bool {
        matches!(self.status, ProbeStatus::Closed { .. })
    }
}

/// Numerical span membership of operators through their coefficients
/// sampled at random chart points.
#[derive(Clone, Debug)]
pub struct SpanTester {
    points: Vec<Point>,
    rank_tol: f64,
}

impl SpanTester {
    pub fn new(chart: &Arc<Chart>, seed: u64, samples: usize, rank_tol: f64) -> SpanTester {
        let rng = CounterRng::new(seed, streams::RANK_PROBES);
        SpanTester {
            points: (0..samples as u64).map(|k| chart.sample(&rng, k)).collect(),
            rank_tol,
        }
    }

    /// Unit-norm sample vectors over the union of the operators' multi-indices.
    pub fn vectors(&self, ops: &[&DiffOp]) -> Result<Vec<Vec<f64>>> {
        let indices: Vec<MultiIndex> = ops
            .iter()
            .flat_map(|o| o.terms().map(|(a, _)| a.clone()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut out = Vec::with_capacity(ops.len());
        for op in ops {
            let rows = op.sample(&indices, &self.points)?;
            let mut v: Vec<f64> = rows.into_iter().flatten().collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
            out.push(v);
        }
        Ok(out)
    }

    /// Relative residual of projecting `op` onto the span of `basis`
    /// (classical Gram–Schmidt, applied twice).
    pub fn residual(&self, basis: &[&DiffOp], op: &DiffOp) -> Result<f64> {
        let mut all: Vec<&DiffOp> = basis.to_vec();
        all.push(op);
        let mut vs = self.vectors(&all)?;
        let v = vs.pop().expect("candidate vector");
        if v.iter().all(|x| *x == 0.0) {
            return Ok(0.0);
        }
        Ok(project_out(&orthonormalize(vs), v))
    }

    /// Numerical rank of a set of operators, from singular values relative
    /// to the largest one.
    pub fn rank(&self, ops: &[&DiffOp]) -> Result<usize> {
        if ops.is_empty() {
            return Ok(0);
        }
        let vs = self.vectors(ops)?;
        let m = vs[0].len();
        let mat = DMatrix::from_fn(m, vs.len(), |r, c| vs[c][r]);
        let sv = mat.singular_values();
        let top = sv.max();
        Ok(sv.iter().filter(|s| **s > self.rank_tol * top).count())
    }

    pub fn in_span(&self, basis: &[&DiffOp], op: &DiffOp) -> Result<bool> {
        Ok(self.residual(basis, op)? < self.rank_tol)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn orthonormalize(vs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    for v in vs {
        let nv = norm(&v);
        let mut w = v;
        for _ in 0..2 {
            for b in &q {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let nw = norm(&w);
        if nw > 1e-13 * nv {
            w.iter_mut().for_each(|x| *x /= nw);
            q.push(w);
        }
    }
    q
}

fn project_out(q: &[Vec<f64>], v: Vec<f64>) -> f64 {
    let nv = norm(&v);
    let mut w = v;
    for _ in 0..2 {
        for b in q {
            let c = dot(b, &w);
            w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
    norm(&w) / nv
}

/// Brackets the generators `L0, h^1·, …, h^m·` pairwise, round after round,
/// keeping the brackets that leave the current span.
pub fn dimension_probe(sys: &FilteringSystem, settings: &ProbeSettings) -> Result<ProbeResult> {
    let chart = sys.chart();
    let tester = SpanTester::new(chart, settings.seed, settings.samples, sys.tolerances().rank);
    let mut basis: Vec<BasisElement> = Vec::new();
    let mut log = Vec::new();
    let mut seeds = alloc::vec![BasisElement {
        label: "L0".into(),
        op: sys.l0().clone()
    }];
    for i in 0..sys.observations().len() {
        seeds.push(BasisElement {
            label: format!("h{}", i + 1),
            op: sys.l_i(i)?,
        });
    }
    for s in seeds {
        let ops: Vec<&DiffOp> = basis.iter().map(|b| &b.op).collect();
        if !s.op.is_zero() && !tester.in_span(&ops, &s.op)? {
            basis.push(s);
        }
    }
    let exceeded = |reached: usize| ProbeStatus::ExceededBound {
        bound: settings.max_dim,
        reached,
        kind: Bound::Dimension,
    };
    if basis.len() > settings.max_dim {
        let reached = basis.len();
        return Ok(ProbeResult { status: exceeded(reached), basis, log, rounds: 0 });
    }
    let mut done = 0;
    let mut round = 0;
    loop {
        if round == settings.max_rounds {
            let reached = basis.len();
            return Ok(ProbeResult {
                status: ProbeStatus::ExceededBound {
                    bound: settings.max_rounds,
                    reached,
                    kind: Bound::Rounds,
                },
                basis,
                log,
                rounds: round,
            });
        }
        round += 1;
        let m = basis.len();
        let mut added_any = false;
        for j in 0..m {
            for i in 0..j {
                if j < done {
                    continue;
                }
                let br = basis[i].op.commutator(&basis[j].op)?;
                let ops: Vec<&DiffOp> = basis.iter().map(|b| &b.op).collect();
                let residual = if br.is_zero() { 0.0 } else { tester.residual(&ops, &br)? };
                let added = residual >= tester.rank_tol;
                let order = br.order();
                if added {
                    let label = format!("[{},{}]", basis[i].label, basis[j].label);
                    basis.push(BasisElement { label, op: br });
                    added_any = true;
                }
                let ops: Vec<&DiffOp> = basis.iter().map(|b| &b.op).collect();
                log.push(BracketLogEntry {
                    round,
                    left: i,
                    right: j,
                    order,
                    residual,
                    added,
                    rank: tester.rank(&ops)?,
                });
                if basis.len() > settings.max_dim {
                    let reached = basis.len();
                    return Ok(ProbeResult { status: exceeded(reached), basis, log, rounds: round });
                }
            }
        }
        done = m;
        if !added_any {
            let dimension = basis.len();
            return Ok(ProbeResult {
                status: ProbeStatus::Closed { dimension },
                basis,
                log,
                rounds: round,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Metric, VectorField};
    use crate::symb::{parse, Expr};
    use crate::tol::Tolerances;

    fn line_sys(drift: &str) -> FilteringSystem {
        let tol = Tolerances::default();
        let r = Chart::euclidean(1, 10.0, &tol).unwrap();
        let f = VectorField(alloc::vec![parse(drift, r.names()).unwrap()]);
        FilteringSystem::new(Metric::flat(r), f, alloc::vec![Expr::coord(0)], tol).unwrap()
    }

    #[test]
    fn oscillator_closes_at_four() {
        let sys = line_sys("0");
        let res = dimension_probe(&sys, &ProbeSettings { max_dim: 10, ..Default::default() }).unwrap();
        assert_eq!(res.status, ProbeStatus::Closed { dimension: 4 });
        let c = sys.chart().clone();
        let tester = SpanTester::new(&c, 99, 128, 1e-8);
        let ops: Vec<&DiffOp> = res.basis.iter().map(|b| &b.op).collect();
        for want in [DiffOp::identity(c.clone()), DiffOp::mult(c.clone(), Expr::coord(0)), DiffOp::partial(c.clone(), 0)] {
            assert!(tester.residual(&ops, &want).unwrap() < 1e-8);
        }
    }

    #[test]
    fn benes_closes_at_four() {
        let res = dimension_probe(&line_sys("tanh(x)"), &ProbeSettings::default()).unwrap();
        assert_eq!(res.status, ProbeStatus::Closed { dimension: 4 });
    }

    #[test]
    fn circle_exceeds_bound() {
        let tol = Tolerances::default();
        let c = Chart::circle(&tol);
        let h = parse("cos(theta)", c.names()).unwrap();
        let sys = FilteringSystem::new(Metric::flat(c), VectorField::zero(1), alloc::vec![h], tol).unwrap();
        let res = dimension_probe(&sys, &ProbeSettings { max_dim: 10, ..Default::default() }).unwrap();
        match res.status {
            ProbeStatus::ExceededBound { bound: 10, reached, kind: Bound::Dimension } => assert!(reached >= 10),
            s => panic!("unexpected {s:?}"),
        }
    }
}
