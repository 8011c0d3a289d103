//! Learnable global-prior tokens and their projection to input channels.
//!
//! `R` has shape `[1, N, d, 1, 1]`. The projection is an N-grouped 1x1x1
//! convolution mapping each token's `d` channels to one value, which is then
//! broadcast over `T x H x W` as a per-token bias field.

use dagr_tensor::{Graph, RngState, Tensor, Var};

use crate::error::{config_err, Error, Result};
use crate::params::{name_stream, Bound, ParamStore};

pub const R_NAME: &str = "reg.R";
pub const PROJ_W_NAME: &str = "reg.proj_w";
pub const PROJ_B_NAME: &str = "reg.proj_b";

#[derive(Clone, Debug, PartialEq)]
pub struct RegisterTokens {
    pub r: Tensor,
    pub proj_w: Tensor,
    pub proj_b: Tensor,
}

pub fn init_tokens(n: usize, d: usize, rng: &RngState) -> Result<RegisterTokens> {
    if n < 1 || d < 1 {
        return config_err(format!("token count {n} and dimension {d} must be >= 1"));
    }
    let r = Tensor::randn([1, n, d, 1, 1], &mut rng.fork(name_stream(R_NAME)));
    let std = (1.0 / d as f64).sqrt();
    let proj_w = Tensor::randn([n, d, 1, 1, 1], &mut rng.fork(name_stream(PROJ_W_NAME)))
        .map(|v| v * std);
    Ok(RegisterTokens {
        r,
        proj_w,
        proj_b: Tensor::zeros([n]),
    })
}

impl RegisterTokens {
    pub fn count(&self) -> usize {
        self.r.shape()[1]
    }

    pub fn dim(&self) -> usize {
        self.r.shape()[2]
    }

    pub fn insert_into(&self, store: &mut ParamStore) {
        store.insert(R_NAME, self.r.clone());
        store.insert(PROJ_W_NAME, self.proj_w.clone());
        store.insert(PROJ_B_NAME, self.proj_b.clone());
    }

    pub fn from_store(store: &ParamStore) -> Result<Self> {
        Ok(Self {
            r: store.get(R_NAME)?.clone(),
            proj_w: store.get(PROJ_W_NAME)?.clone(),
            proj_b: store.get(PROJ_B_NAME)?.clone(),
        })
    }

    /// Token rows `R[n, :]`.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        self.r.data().chunks(d).map(<[f64]>::to_vec).collect()
    }

    /// Gradient-free `R'` of shape `[N, T, H, W]`.
    pub fn project(&self, t: usize, h: usize, w: usize) -> Result<Tensor> {
        let mut g = Graph::new();
        let r = g.constant(self.r.clone());
        let pw = g.constant(self.proj_w.clone());
        let pb = g.constant(self.proj_b.clone());
        let out = project_tokens(&mut g, r, pw, pb, t, h, w)?;
        Ok(g.value(out).clone())
    }
}

/// Per-token scalars `sum_k w[n,k] R[n,k] + b[n]`, shape `[N]`.
pub fn token_scalars(g: &mut Graph, r: Var, proj_w: Var, proj_b: Var) -> Result<Var> {
    let rs = g.shape(r).to_vec();
    if rs.len() != 5 || rs[0] != 1 || rs[3] != 1 || rs[4] != 1 {
        return Err(Error::Config(format!("token tensor shape {rs:?}, expected [1,N,d,1,1]")));
    }
    let (n, d) = (rs[1], rs[2]);
    if g.shape(proj_w) != [n, d, 1, 1, 1] || g.shape(proj_b) != [n] {
        return Err(Error::Config(format!(
            "projection shapes {:?} / {:?} for {n} tokens of dimension {d}",
            g.shape(proj_w),
            g.shape(proj_b)
        )));
    }
    let r2 = g.reshape(r, [n, d])?;
    let w2 = g.reshape(proj_w, [n, d])?;
    let prod = g.mul(r2, w2)?;
    let s = g.sum_axes(prod, &[1], false)?;
    Ok(g.add(s, proj_b)?)
}

/// `R'` of shape `[N, T, H, W]`.
pub fn project_tokens(
    g: &mut Graph,
    r: Var,
    proj_w: Var,
    proj_b: Var,
    t: usize,
    h: usize,
    w: usize,
) -> Result<Var> {
    if t == 0 || h == 0 || w == 0 {
        return config_err(format!("projection target {t}x{h}x{w} must be positive"));
    }
    let s = token_scalars(g, r, proj_w, proj_b)?;
    let n = g.shape(s)[0];
    let field = g.reshape(s, [n, 1, 1, 1])?;
    Ok(g.broadcast_to(field, [n, t, h, w])?)
}

/// Projection through bound parameters named `reg.*`.
pub fn project_bound(g: &mut Graph, bound: &Bound, t: usize, h: usize, w: usize) -> Result<Var> {
    let (r, pw, pb) = (bound.get(R_NAME)?, bound.get(PROJ_W_NAME)?, bound.get(PROJ_B_NAME)?);
    project_tokens(g, r, pw, pb, t, h, w)
}

/// Concatenates the projected tokens after the video channels.
///
/// `video` is `[C,T,H,W]` or `[B,C,T,H,W]`; `projected` is `[N,T,H,W]` and is
/// shared across the batch. `None` returns the video untouched.
pub fn augment_input(g: &mut Graph, video: Var, projected: Option<Var>) -> Result<Var> {
    let Some(p) = projected else {
        return Ok(video);
    };
    let vs = g.shape(video).to_vec();
    let ps = g.shape(p).to_vec();
    if ps.len() != 4 || vs.len() < 4 || vs[vs.len() - 3..] != ps[1..] {
        return Err(Error::Config(format!(
            "video {vs:?} and projected tokens {ps:?} disagree on T,H,W"
        )));
    }
    match vs.len() {
        4 => Ok(g.concat(&[video, p], 0)?),
        5 => {
            let p5 = g.reshape(p, [1, ps[0], ps[1], ps[2], ps[3]])?;
            let pb = g.broadcast_to(p5, [vs[0], ps[0], ps[1], ps[2], ps[3]])?;
            Ok(g.concat(&[video, pb], 1)?)
        }
        _ => config_err(format!("video rank {} not 4 or 5", vs.len())),
    }
}
