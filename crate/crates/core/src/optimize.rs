//! Derivative-free local minimization (Nelder–Mead simplex).

/// Standard Nelder–Mead with reflection 1, expansion 2, contraction ½ and
/// shrink ½.
#[derive(Debug, Clone)]
pub struct NelderMead {
    /// Hard cap on objective evaluations.
    pub max_evals: usize,
    /// Stop when an iteration lowers the best value by less than this, or
    /// when the simplex values span less than this.
    pub ftol: f64,
    /// Offset of the initial simplex vertices along each axis.
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            max_evals: 200,
            ftol: 1e-6,
            initial_step: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    /// Objective value of every evaluation, in call order.
    pub history: Vec<f64>,
    pub converged: bool,
}

impl Minimum {
    pub fn evaluations(&self) -> usize {
        self.history.len()
    }
}

/// Objective failure together with the values recorded before it.
#[derive(Debug)]
pub struct Aborted<E> {
    pub error: E,
    pub history: Vec<f64>,
}

struct Counted<'a, F> {
    f: &'a mut F,
    history: Vec<f64>,
    budget: usize,
    best: Option<(Vec<f64>, f64)>,
}

impl<F, E> Counted<'_, F>
where
    F: FnMut(&[f64]) -> Result<f64, E>,
{
    fn exhausted(&self) -> bool {
        self.history.len() >= self.budget
    }

    fn eval(&mut self, x: &[f64]) -> Result<f64, E> {
        let v = (self.f)(x)?;
        self.history.push(v);
        if self.best.as_ref().is_none_or(|(_, b)| v < *b) {
            self.best = Some((x.to_vec(), v));
        }
        Ok(v)
    }
}

impl NelderMead {
    pub fn minimize<F, E>(&self, mut f: F, x0: &[f64]) -> Result<Minimum, Aborted<E>>
    where
        F: FnMut(&[f64]) -> Result<f64, E>,
    {
        let mut obj = Counted {
            f: &mut f,
            history: Vec::new(),
            budget: self.max_evals.max(1),
            best: None,
        };
        let converged = match self.run(&mut obj, x0) {
            Ok(c) => c,
            Err(error) => {
                return Err(Aborted {
                    error,
                    history: obj.history,
                })
            }
        };
        let (x, value) = obj.best.expect("at least one evaluation");
        Ok(Minimum {
            x,
            value,
            history: obj.history,
            converged,
        })
    }

    fn run<F, E>(&self, obj: &mut Counted<'_, F>, x0: &[f64]) -> Result<bool, E>
    where
        F: FnMut(&[f64]) -> Result<f64, E>,
    {
        let n = x0.len();
        let first = obj.eval(x0)?;
        if n == 0 {
            return Ok(true);
        }
        let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), first)];
        for i in 0..n {
            if obj.exhausted() {
                return Ok(false);
            }
            let mut x = x0.to_vec();
            x[i] += self.initial_step;
            let v = obj.eval(&x)?;
            simplex.push((x, v));
        }

        let mut best = f64::INFINITY;
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let (lo, hi) = (simplex[0].1, simplex[n].1);
            if lo < best {
                let improvement = best - lo;
                best = lo;
                if improvement < self.ftol {
                    return Ok(true);
                }
            }
            if hi - lo < self.ftol {
                return Ok(true);
            }
            if obj.exhausted() {
                return Ok(false);
            }

            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
                .collect();
            let toward = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n].0)
                    .map(|(c, w)| c + t * (w - c))
                    .collect()
            };

            let reflected = toward(-1.0);
            let fr = obj.eval(&reflected)?;
            if fr < simplex[0].1 {
                if obj.exhausted() {
                    simplex[n] = (reflected, fr);
                    continue;
                }
                let expanded = toward(-2.0);
                let fe = obj.eval(&expanded)?;
                simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (reflected, fr);
                continue;
            }
            if obj.exhausted() {
                continue;
            }
            let (contracted, accept_below) = if fr < simplex[n].1 {
                (toward(-0.5), fr)
            } else {
                (toward(0.5), simplex[n].1)
            };
            let fc = obj.eval(&contracted)?;
            if fc < accept_below {
                simplex[n] = (contracted, fc);
                continue;
            }
            // Shrink toward the best vertex.
            let anchor = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                if obj.exhausted() {
                    break;
                }
                let x: Vec<f64> = anchor
                    .iter()
                    .zip(&vertex.0)
                    .map(|(a, v)| a + 0.5 * (v - a))
                    .collect();
                let v = obj.eval(&x)?;
                *vertex = (x, v);
            }
        }
    }
}
