//! Adaptive Simpson quadrature.
//!
//! The integrator works level by level: every panel still being refined
//! contributes its two new quarter points to one batch, and the integrand is
//! evaluated on the whole batch at once. This lets expensive vector-valued
//! integrands (Monte Carlo averages over many draws) amortize one pass over
//! their data per refinement level. Accepted panels use the extrapolated
//! value `S2 + (S2 - S1) / 15`, so the result is also a fixed linear rule
//! whose nodes and weights are returned for reuse.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SimpsonOptions {
    /// Absolute error target for the whole interval.
    pub tol: f64,
    /// Maximum number of bisections of any initial panel.
    pub max_depth: u32,
    /// Number of equal panels the interval is split into before adapting.
    pub initial_panels: usize,
}

impl Default for SimpsonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_depth: 40, initial_panels: 8 }
    }
}

impl SimpsonOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Quadrature rule produced by an adaptive run: `value = sum w_k f(x_k)`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub value: f64,
}

impl QuadratureRule {
    /// Applies the rule to values of another function at the same nodes.
    pub fn apply(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.nodes.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    // node indices of a, midpoint, b
    ia: usize,
    im: usize,
    ib: usize,
    whole: f64,
    eps: f64,
    depth: u32,
}

/// Integrates `f` over `[a, b]` with a scalar integrand.
pub fn adaptive_simpson<F>(mut f: F, a: f64, b: f64, opts: SimpsonOptions) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    adaptive_simpson_batched(|xs: &[f64]| xs.iter().map(|&x| f(x)).collect(), a, b, opts).map(|rule| rule.value)
}

/// Integrates over `[a, b]` calling `f` once per refinement level with all
/// new abscissae. `f` must return one value per abscissa, in order.
pub fn adaptive_simpson_batched<F>(mut f: F, a: f64, b: f64, opts: SimpsonOptions) -> Result<QuadratureRule>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    if a == b {
        return Ok(QuadratureRule { nodes: vec![], weights: vec![], value: 0.0 });
    }
    let panels = opts.initial_panels.max(1);
    let mut nodes: Vec<f64> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut eval = |xs: Vec<f64>, nodes: &mut Vec<f64>, values: &mut Vec<f64>| -> usize {
        let start = nodes.len();
        let fx = f(&xs);
        assert_eq!(fx.len(), xs.len(), "integrand returned wrong batch size");
        nodes.extend(xs);
        values.extend(fx);
        start
    };

    // Initial grid: panel edges and midpoints.
    let width = (b - a) / panels as f64;
    let mut xs = Vec::with_capacity(2 * panels + 1);
    for k in 0..=2 * panels {
        xs.push(if k == 2 * panels { b } else { a + width * k as f64 / 2.0 });
    }
    eval(xs, &mut nodes, &mut values);
    let mut active: Vec<Panel> = (0..panels)
        .map(|p| {
            let (ia, im, ib) = (2 * p, 2 * p + 1, 2 * p + 2);
            let (pa, pb) = (nodes[ia], nodes[ib]);
            Panel {
                a: pa,
                b: pb,
                ia,
                im,
                ib,
                whole: (pb - pa) / 6.0 * (values[ia] + 4.0 * values[im] + values[ib]),
                eps: opts.tol / panels as f64,
                depth: 0,
            }
        })
        .collect();

    let mut weights = vec![0.0; nodes.len()];
    let mut accepted: Vec<(f64, f64)> = Vec::new();
    while !active.is_empty() {
        let quarter: Vec<f64> = active
            .iter()
            .flat_map(|p| {
                let m = nodes[p.im];
                [0.5 * (p.a + m), 0.5 * (m + p.b)]
            })
            .collect();
        let start = eval(quarter, &mut nodes, &mut values);
        weights.resize(nodes.len(), 0.0);

        let mut next = Vec::new();
        for (k, p) in active.iter().enumerate() {
            let (il, ir) = (start + 2 * k, start + 2 * k + 1);
            let m = nodes[p.im];
            let (fa, fm, fb) = (values[p.ia], values[p.im], values[p.ib]);
            let left = (m - p.a) / 6.0 * (fa + 4.0 * values[il] + fm);
            let right = (p.b - m) / 6.0 * (fm + 4.0 * values[ir] + fb);
            let delta = left + right - p.whole;
            if !delta.is_finite() {
                return Err(Error::QuadratureNonConvergence { a: p.a, b: p.b });
            }
            // Panels too narrow to bisect meaningfully are accepted as is.
            let narrow = (p.b - p.a).abs() <= 64.0 * f64::EPSILON * p.a.abs().max(p.b.abs());
            if delta.abs() <= 15.0 * p.eps || narrow {
                // Boole weights: 7, 32, 12, 32, 7 over 90, times panel width.
                let h = (p.b - p.a) / 90.0;
                weights[p.ia] += 7.0 * h;
                weights[il] += 32.0 * h;
                weights[p.im] += 12.0 * h;
                weights[ir] += 32.0 * h;
                weights[p.ib] += 7.0 * h;
                accepted.push((p.a, left + right + delta / 15.0));
            } else if p.depth + 1 >= opts.max_depth {
                return Err(Error::QuadratureNonConvergence { a: p.a, b: p.b });
            } else {
                next.push(Panel {
                    a: p.a,
                    b: m,
                    ia: p.ia,
                    im: il,
                    ib: p.im,
                    whole: left,
                    eps: p.eps / 2.0,
                    depth: p.depth + 1,
                });
                next.push(Panel {
                    a: m,
                    b: p.b,
                    ia: p.im,
                    im: ir,
                    ib: p.ib,
                    whole: right,
                    eps: p.eps / 2.0,
                    depth: p.depth + 1,
                });
            }
        }
        active = next;
    }
    accepted.sort_by(|x, y| x.0.total_cmp(&y.0));
    let value = accepted.iter().map(|&(_, v)| v).sum();
    Ok(QuadratureRule { nodes, weights, value })
}

/// Integrates an even, rapidly decaying integrand over the real line as
/// `2 * int_0^L f`.
pub fn integrate_even<F>(f: F, half_width: f64, opts: SimpsonOptions) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    Ok(2.0 * adaptive_simpson(f, 0.0, half_width, opts)?)
}
