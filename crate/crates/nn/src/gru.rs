use hytl_autodiff::{Bound, ParamStore, Tensor};
use rand::Rng;

use crate::{Linear, Result};

/// Gated recurrent unit: `h' = (1 − z) ⊙ h + z ⊙ h̃`.
#[derive(Clone, Debug)]
pub struct GruCell {
    pub wz: Linear,
    pub uz: Linear,
    pub wr: Linear,
    pub ur: Linear,
    pub wh: Linear,
    pub uh: Linear,
    pub input: usize,
    pub hidden: usize,
}

impl GruCell {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        GruCell {
            wz: Linear::new(store, &format!("{name}/wz"), input, hidden, true, rng),
            uz: Linear::new(store, &format!("{name}/uz"), hidden, hidden, false, rng),
            wr: Linear::new(store, &format!("{name}/wr"), input, hidden, true, rng),
            ur: Linear::new(store, &format!("{name}/ur"), hidden, hidden, false, rng),
            wh: Linear::new(store, &format!("{name}/wh"), input, hidden, true, rng),
            uh: Linear::new(store, &format!("{name}/uh"), hidden, hidden, false, rng),
            input,
            hidden,
        }
    }

    /// `x: B × input`, `h: B × hidden` → next hidden state.
    pub fn step<'t>(&self, p: &Bound<'t>, x: Tensor<'t>, h: Tensor<'t>) -> Result<Tensor<'t>> {
        let z = self.wz.forward(p, x)?.add(self.uz.forward(p, h)?)?.sigmoid();
        let r = self.wr.forward(p, x)?.add(self.ur.forward(p, h)?)?.sigmoid();
        let cand = self.wh.forward(p, x)?.add(self.uh.forward(p, r.mul(h)?)?)?.tanh();
        let keep = z.neg().add_scalar(1.0).mul(h)?;
        Ok(keep.add(z.mul(cand)?)?)
    }
}
