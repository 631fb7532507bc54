//! Adaptive Simpson quadrature over batches of integrands that share their
//! evaluation points, and golden-section maximization.

use crate::error::{Error, Result};

/// Relative tolerance certified by successive-refinement agreement.
pub const SIMPSON_REL_TOL: f64 = 1e-10;
/// Maximal bisection depth below the initial panels.
pub const SIMPSON_MAX_DEPTH: usize = 40;
const INITIAL_PANELS: usize = 16;

/// How the refinement error of a batch is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Acceptance {
    /// Every component separately against its own tolerance.
    PerComponent,
    /// Euclidean norm of the error vector against the norm of the integral.
    Euclidean,
}

struct Batch<F> {
    f: F,
    width: usize,
    tol: Vec<f64>,
    total_len: f64,
    mode: Acceptance,
    max_depth: usize,
    evaluations: usize,
}

impl<F: FnMut(f64, &mut [f64])> Batch<F> {
    fn eval(&mut self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        (self.f)(t, &mut out);
        self.evaluations += 1;
        out
    }

    fn accepted(&self, coarse: &[f64], fine: &[f64], frac: f64) -> bool {
        match self.mode {
            Acceptance::PerComponent => coarse
                .iter()
                .zip(fine)
                .zip(&self.tol)
                .all(|((c, f), tol)| (f - c).abs() <= 15.0 * tol * frac),
            Acceptance::Euclidean => {
                let err: f64 = coarse.iter().zip(fine).map(|(c, f)| (f - c).powi(2)).sum();
                err.sqrt() <= 15.0 * self.tol[0] * frac
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(
        &mut self,
        l: f64,
        r: f64,
        fl: &[f64],
        fm: &[f64],
        fr: &[f64],
        whole: &[f64],
        depth: usize,
        acc: &mut [f64],
    ) -> Result<()> {
        let m = 0.5 * (l + r);
        let h = r - l;
        let flm = self.eval(0.5 * (l + m));
        let frm = self.eval(0.5 * (m + r));
        let left = simpson(h / 2.0, fl, &flm, fm);
        let right = simpson(h / 2.0, fm, &frm, fr);
        let fine: Vec<f64> = left.iter().zip(&right).map(|(a, b)| a + b).collect();
        let frac = h / self.total_len;
        if self.accepted(whole, &fine, frac) {
            for ((a, f), w) in acc.iter_mut().zip(&fine).zip(whole) {
                *a += f + (f - w) / 15.0;
            }
            return Ok(());
        }
        if depth >= self.max_depth {
            return Err(Error::QuadratureNonConvergence { a: l, b: r });
        }
        self.refine(l, m, fl, &flm, fm, &left, depth + 1, acc)?;
        self.refine(m, r, fm, &frm, fr, &right, depth + 1, acc)
    }
}

fn simpson(h: f64, fa: &[f64], fm: &[f64], fb: &[f64]) -> Vec<f64> {
    fa.iter()
        .zip(fm)
        .zip(fb)
        .map(|((a, m), b)| h / 6.0 * (a + 4.0 * m + b))
        .collect()
}

/// Result of a batched quadrature.
#[derive(Debug, Clone)]
pub struct Integral {
    pub values: Vec<f64>,
    pub evaluations: usize,
}

/// Integrates `width` functions over `[a, b]`. `f(t, out)` writes all
/// integrands at `t`. The tolerance per component is
/// `max(rel_tol · |I₀|, abs_floor)` where `I₀` is the estimate from the
/// initial composite rule.
pub fn adaptive_simpson<F>(
    f: F,
    width: usize,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_floor: &[f64],
    mode: Acceptance,
) -> Result<Integral>
where
    F: FnMut(f64, &mut [f64]),
{
    if width == 0 || a == b {
        return Ok(Integral {
            values: vec![0.0; width],
            evaluations: 0,
        });
    }
    let mut batch = Batch {
        f,
        width,
        tol: Vec::new(),
        total_len: b - a,
        mode,
        max_depth: SIMPSON_MAX_DEPTH,
        evaluations: 0,
    };
    let h = (b - a) / INITIAL_PANELS as f64;
    let nodes: Vec<Vec<f64>> = (0..=2 * INITIAL_PANELS)
        .map(|k| batch.eval(a + 0.5 * h * k as f64))
        .collect();
    let panels: Vec<Vec<f64>> = (0..INITIAL_PANELS)
        .map(|p| simpson(h, &nodes[2 * p], &nodes[2 * p + 1], &nodes[2 * p + 2]))
        .collect();
    let mut estimate = vec![0.0; width];
    for panel in &panels {
        for (e, v) in estimate.iter_mut().zip(panel) {
            *e += v;
        }
    }
    batch.tol = match mode {
        Acceptance::PerComponent => estimate
            .iter()
            .zip(abs_floor)
            .map(|(e, fl)| (rel_tol * e.abs()).max(*fl))
            .collect(),
        Acceptance::Euclidean => {
            let norm = estimate.iter().map(|e| e * e).sum::<f64>().sqrt();
            vec![(rel_tol * norm).max(abs_floor.first().copied().unwrap_or(0.0))]
        }
    };
    let mut acc = vec![0.0; width];
    for p in 0..INITIAL_PANELS {
        let l = a + h * p as f64;
        batch.refine(
            l,
            l + h,
            &nodes[2 * p],
            &nodes[2 * p + 1],
            &nodes[2 * p + 2],
            &panels[p],
            0,
            &mut acc,
        )?;
    }
    Ok(Integral {
        values: acc,
        evaluations: batch.evaluations,
    })
}

/// Per-component variant of [`adaptive_simpson`] that stops evaluating a
/// component once it has converged on a panel. `f(t, active, out)` must
/// write `out[j]` for every `j` in `active` and may leave the rest alone.
pub fn adaptive_simpson_masked<F>(
    mut f: F,
    width: usize,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_floor: &[f64],
) -> Result<Integral>
where
    F: FnMut(f64, &[usize], &mut [f64]),
{
    if width == 0 || a == b {
        return Ok(Integral {
            values: vec![0.0; width],
            evaluations: 0,
        });
    }
    let all: Vec<usize> = (0..width).collect();
    let mut evaluations = 0;
    let mut eval = |t: f64, active: &[usize], evaluations: &mut usize| {
        let mut out = vec![0.0; width];
        f(t, active, &mut out);
        *evaluations += 1;
        out
    };
    let h = (b - a) / INITIAL_PANELS as f64;
    let nodes: Vec<Vec<f64>> = (0..=2 * INITIAL_PANELS)
        .map(|k| eval(a + 0.5 * h * k as f64, &all, &mut evaluations))
        .collect();
    let panels: Vec<Vec<f64>> = (0..INITIAL_PANELS)
        .map(|p| simpson(h, &nodes[2 * p], &nodes[2 * p + 1], &nodes[2 * p + 2]))
        .collect();
    let mut tol = vec![0.0; width];
    for (j, t) in tol.iter_mut().enumerate() {
        let estimate: f64 = panels.iter().map(|p| p[j]).sum();
        *t = (rel_tol * estimate.abs()).max(abs_floor[j]);
    }

    struct Panel {
        l: f64,
        r: f64,
        fl: Vec<f64>,
        fm: Vec<f64>,
        fr: Vec<f64>,
        whole: Vec<f64>,
        active: Vec<usize>,
        depth: usize,
    }
    let mut acc = vec![0.0; width];
    let mut stack: Vec<Panel> = (0..INITIAL_PANELS)
        .rev()
        .map(|p| Panel {
            l: a + h * p as f64,
            r: a + h * (p + 1) as f64,
            fl: nodes[2 * p].clone(),
            fm: nodes[2 * p + 1].clone(),
            fr: nodes[2 * p + 2].clone(),
            whole: panels[p].clone(),
            active: all.clone(),
            depth: 0,
        })
        .collect();
    let total_len = b - a;
    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.l + p.r);
        let half = 0.5 * (p.r - p.l);
        let flm = eval(0.5 * (p.l + m), &p.active, &mut evaluations);
        let frm = eval(0.5 * (m + p.r), &p.active, &mut evaluations);
        let frac = (p.r - p.l) / total_len;
        let mut left = vec![0.0; width];
        let mut right = vec![0.0; width];
        let mut pending = Vec::new();
        for &j in &p.active {
            left[j] = half / 6.0 * (p.fl[j] + 4.0 * flm[j] + p.fm[j]);
            right[j] = half / 6.0 * (p.fm[j] + 4.0 * frm[j] + p.fr[j]);
            let fine = left[j] + right[j];
            if (fine - p.whole[j]).abs() <= 15.0 * tol[j] * frac {
                acc[j] += fine + (fine - p.whole[j]) / 15.0;
            } else {
                pending.push(j);
            }
        }
        if pending.is_empty() {
            continue;
        }
        if p.depth >= SIMPSON_MAX_DEPTH {
            return Err(Error::QuadratureNonConvergence { a: p.l, b: p.r });
        }
        stack.push(Panel {
            l: m,
            r: p.r,
            fl: p.fm.clone(),
            fm: frm,
            fr: p.fr,
            whole: right,
            active: pending.clone(),
            depth: p.depth + 1,
        });
        stack.push(Panel {
            l: p.l,
            r: m,
            fl: p.fl,
            fm: flm,
            fr: p.fm,
            whole: left,
            active: pending,
            depth: p.depth + 1,
        });
    }
    Ok(Integral {
        values: acc,
        evaluations,
    })
}

/// Scalar convenience wrapper around [`adaptive_simpson`].
pub fn adaptive_simpson_scalar(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> Result<f64> {
    let out = adaptive_simpson(
        |t, out| out[0] = f(t),
        1,
        a,
        b,
        rel_tol,
        &[abs_floor],
        Acceptance::PerComponent,
    )?;
    Ok(out.values[0])
}

/// Golden-section search for a local maximum of `f` on `[lo, hi]`.
/// Returns `(argmax, max)` including the endpoints as candidates.
pub fn golden_max(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, x_tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = (c, fc);
    for _ in 0..200 {
        if (b - a).abs() <= x_tol {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        for cand in [(c, fc), (d, fd)] {
            if cand.1 > best.1 {
                best = cand;
            }
        }
    }
    for x in [lo, hi] {
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}
