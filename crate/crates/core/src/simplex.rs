//! Bounded Nelder–Mead simplex search.
//!
//! Every trial point is clipped into the box before evaluation, so the
//! objective is never called outside its domain. Convergence is declared on
//! simplex diameter; the search is then rebuilt once around the best vertex
//! with a smaller step, which catches premature collapse in narrow valleys.

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    pub initial_step: f64,
    /// Stop when the largest vertex distance from the best vertex drops below this.
    pub tol_x: f64,
    /// Stop when the value spread across vertices drops below this and the
    /// simplex is already smaller than `100 * tol_x`.
    pub tol_f: f64,
    pub max_iter: usize,
    /// Number of rebuilds around the current best after convergence.
    pub rebuilds: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

struct Search<'a, F: FnMut(&[f64]) -> f64> {
    f: &'a mut F,
    opts: &'a SimplexOptions,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> f64> Search<'_, F> {
    fn clip(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.opts.lower).zip(&self.opts.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evaluations += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    fn initial_simplex(&mut self, x0: &[f64], step: f64) -> Vec<(Vec<f64>, f64)> {
        let n = x0.len();
        let mut base = x0.to_vec();
        self.clip(&mut base);
        let fb = self.eval(&base);
        let mut simplex = vec![(base.clone(), fb)];
        for i in 0..n {
            let mut v = base.clone();
            // Step inward when the vertex would leave the box.
            let room_up = self.opts.upper[i] - v[i];
            v[i] += if room_up >= step { step } else { -step };
            self.clip(&mut v);
            let fv = self.eval(&v);
            simplex.push((v, fv));
        }
        simplex
    }

    fn run(&mut self, x0: &[f64], step: f64, budget: usize) -> (Vec<f64>, f64, usize, bool) {
        let n = x0.len();
        let mut simplex = self.initial_simplex(x0, step);
        let mut iter = 0;
        let mut converged = false;
        while iter < budget {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| lex(&a.0, &b.0)));
            let best = &simplex[0];
            let diameter = simplex[1..]
                .iter()
                .map(|(v, _)| dist_inf(v, &best.0))
                .fold(0.0, f64::max);
            let spread = simplex[n].1 - simplex[0].1;
            if diameter <= self.opts.tol_x
                || (spread <= self.opts.tol_f && diameter <= 100.0 * self.opts.tol_x)
            {
                converged = true;
                break;
            }
            iter += 1;

            let mut centroid = vec![0.0; n];
            for (v, _) in &simplex[..n] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / n as f64;
                }
            }
            let worst = simplex[n].clone();
            let along = |coef: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&worst.0)
                    .map(|(c, w)| c + coef * (c - w))
                    .collect()
            };

            let mut xr = along(REFLECT);
            self.clip(&mut xr);
            let fr = self.eval(&xr);
            if fr < simplex[0].1 {
                let mut xe = along(REFLECT * EXPAND);
                self.clip(&mut xe);
                let fe = self.eval(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            let (mut xc, outside) = if fr < worst.1 {
                (along(REFLECT * CONTRACT), true)
            } else {
                (along(-CONTRACT), false)
            };
            self.clip(&mut xc);
            let fc = self.eval(&xc);
            let accept = if outside { fc <= fr } else { fc < worst.1 };
            if accept {
                simplex[n] = (xc, fc);
                continue;
            }
            let anchor = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                let mut v: Vec<f64> = anchor
                    .iter()
                    .zip(&vertex.0)
                    .map(|(a, x)| a + SHRINK * (x - a))
                    .collect();
                self.clip(&mut v);
                let fv = self.eval(&v);
                *vertex = (v, fv);
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| lex(&a.0, &b.0)));
        let (x, f) = simplex.swap_remove(0);
        (x, f, iter, converged)
    }
}

fn dist_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn lex(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            ord => return ord,
        }
    }
    std::cmp::Ordering::Equal
}

/// Minimizes `f` starting from `x0` inside the box `[lower, upper]`.
pub fn minimize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    opts: &SimplexOptions,
) -> SimplexResult {
    assert_eq!(x0.len(), opts.lower.len(), "bounds dimension");
    assert_eq!(x0.len(), opts.upper.len(), "bounds dimension");
    let mut search = Search {
        f: &mut f,
        opts,
        evaluations: 0,
    };
    if x0.is_empty() {
        let v = search.eval(x0);
        return SimplexResult {
            x: Vec::new(),
            f: v,
            iterations: 0,
            evaluations: 1,
            converged: true,
        };
    }
    let (mut x, mut fx, mut iterations, mut converged) =
        search.run(x0, opts.initial_step, opts.max_iter);
    let mut step = opts.initial_step;
    for _ in 0..opts.rebuilds {
        if iterations >= opts.max_iter {
            break;
        }
        step = (step * 0.1).max(opts.tol_x * 10.0);
        let (x2, f2, it2, c2) = search.run(&x, step, opts.max_iter - iterations);
        iterations += it2;
        if f2 < fx {
            x = x2;
            fx = f2;
            converged = c2;
        } else {
            converged = converged || c2;
            break;
        }
    }
    SimplexResult {
        x,
        f: fx,
        iterations,
        evaluations: search.evaluations,
        converged,
    }
}
