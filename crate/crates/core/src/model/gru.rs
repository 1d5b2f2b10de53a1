use crate::tensor::{Graph, ParamId, ParamStore, Var};

use super::{ModelError, Result};

/// Update (`z`), reset (`r`) and candidate (`h`) weights of one GRU cell.
/// `w_*` are `[d_h, d_in]`, `u_*` are `[d_h, d_h]`, `b_*` are `[d_h]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GruParams {
    pub w_z: ParamId,
    pub u_z: ParamId,
    pub b_z: ParamId,
    pub w_r: ParamId,
    pub u_r: ParamId,
    pub b_r: ParamId,
    pub w_h: ParamId,
    pub u_h: ParamId,
    pub b_h: ParamId,
}

impl GruParams {
    pub fn resolve(store: &ParamStore, prefix: &str) -> Result<Self> {
        let id = |n: &str| store.id(&format!("{prefix}.{n}")).map_err(ModelError::from);
        Ok(Self {
            w_z: id("w_z")?,
            u_z: id("u_z")?,
            b_z: id("b_z")?,
            w_r: id("w_r")?,
            u_r: id("u_r")?,
            b_r: id("b_r")?,
            w_h: id("w_h")?,
            u_h: id("u_h")?,
            b_h: id("b_h")?,
        })
    }

    pub fn hidden(&self, store: &ParamStore) -> usize {
        store.value(self.b_z).len()
    }

    pub fn ids(&self) -> [ParamId; 9] {
        [
            self.w_z, self.u_z, self.b_z, self.w_r, self.u_r, self.b_r, self.w_h, self.u_h, self.b_h,
        ]
    }
}

/// One GRU update:
/// `z = σ(W_z x + U_z h + b_z)`, `r = σ(W_r x + U_r h + b_r)`,
/// `ĥ = tanh(W_h x + U_h (r ⊙ h) + b_h)`, `h' = (1 − z) ⊙ h + z ⊙ ĥ`.
pub fn gru_step(g: &mut Graph, p: &GruParams, h_prev: Var, x: Var) -> Result<Var> {
    let gate = |g: &mut Graph, w: ParamId, u: ParamId, b: ParamId, h: Var| -> Result<Var> {
        let (w, u, b) = (g.param(w), g.param(u), g.param(b));
        let wx = g.matmul(w, x)?;
        let uh = g.matmul(u, h)?;
        Ok(g.add_n(&[wx, uh, b])?)
    };
    let z = gate(g, p.w_z, p.u_z, p.b_z, h_prev)?;
    let z = g.sigmoid(z)?;
    let r = gate(g, p.w_r, p.u_r, p.b_r, h_prev)?;
    let r = g.sigmoid(r)?;
    let rh = g.mul(r, h_prev)?;
    let cand = gate(g, p.w_h, p.u_h, p.b_h, rh)?;
    let cand = g.tanh(cand)?;
    // (1 - z) h + z ĥ = h + z (ĥ - h)
    let diff = g.sub(cand, h_prev)?;
    let step = g.mul(z, diff)?;
    Ok(g.add(h_prev, step)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{ParamGroup, Tensor};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn store(d_in: usize, d_h: usize, fill: impl Fn(usize) -> f64) -> (ParamStore, GruParams) {
        let mut s = ParamStore::new();
        let mut n = 0;
        for gate in ["z", "r", "h"] {
            for (kind, shape) in [("w", vec![d_h, d_in]), ("u", vec![d_h, d_h]), ("b", vec![d_h])] {
                let len = shape.iter().product();
                let data = (0..len).map(|i| fill(n * 1000 + i)).collect();
                s.insert(&format!("g.{kind}_{gate}"), ParamGroup::Lookahead, Tensor::new(shape, data).unwrap())
                    .unwrap();
                n += 1;
            }
        }
        let p = GruParams::resolve(&s, "g").unwrap();
        (s, p)
    }

    fn run(s: &ParamStore, p: &GruParams, h: Vec<f64>, x: Vec<f64>) -> Vec<f64> {
        let mut g = Graph::inference(s);
        let h = g.constant(Tensor::vector(h));
        let x = g.constant(Tensor::vector(x));
        let out = gru_step(&mut g, p, h, x).unwrap();
        g.value(out).data().to_vec()
    }

    #[test]
    fn zero_params_zero_state() {
        let (s, p) = store(2, 3, |_| 0.0);
        assert_eq!(run(&s, &p, vec![0.0; 3], vec![1.0, -1.0]), vec![0.0; 3]);
    }

    #[test]
    fn zero_params_halve_the_state() {
        let (s, p) = store(2, 3, |_| 0.0);
        assert_eq!(run(&s, &p, vec![2.0, -4.0, 1.0], vec![1.0, 1.0]), vec![1.0, -2.0, 0.5]);
    }

    /// Per-coordinate reference written directly from the update equations.
    fn reference(s: &ParamStore, p: &GruParams, h: &[f64], x: &[f64]) -> Vec<f64> {
        let v = |id: ParamId| s.value(id).data().to_vec();
        let (d_h, d_in) = (h.len(), x.len());
        let sig = |a: f64| 1.0 / (1.0 + (-a).exp());
        let affine = |w: &[f64], u: &[f64], b: &[f64], x: &[f64], h: &[f64], i: usize| {
            let mut a = b[i];
            for j in 0..d_in {
                a += w[i * d_in + j] * x[j];
            }
            for j in 0..d_h {
                a += u[i * d_h + j] * h[j];
            }
            a
        };
        let (wz, uz, bz) = (v(p.w_z), v(p.u_z), v(p.b_z));
        let (wr, ur, br) = (v(p.w_r), v(p.u_r), v(p.b_r));
        let (wh, uh, bh) = (v(p.w_h), v(p.u_h), v(p.b_h));
        let r: Vec<f64> = (0..d_h).map(|i| sig(affine(&wr, &ur, &br, x, h, i))).collect();
        let rh: Vec<f64> = (0..d_h).map(|i| r[i] * h[i]).collect();
        (0..d_h)
            .map(|i| {
                let z = sig(affine(&wz, &uz, &bz, x, h, i));
                let c = affine(&wh, &uh, &bh, x, &rh, i).tanh();
                (1.0 - z) * h[i] + z * c
            })
            .collect()
    }

    #[test]
    fn matches_scalar_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let vals: Vec<f64> = (0..20000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (s, p) = store(3, 4, |i| vals[i % vals.len()]);
        let h = vec![0.3, -0.7, 0.1, 0.9];
        let x = vec![-0.2, 0.5, 1.5];
        let got = run(&s, &p, h.clone(), x.clone());
        let want = reference(&s, &p, &h, &x);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
