use num_traits::{Signed, Zero};
use serde_json::{json, Value};

use super::maps::{map_set, pull_back_cell, push_map, MapTag};
use super::rademacher::{level_value, level_values, rademacher_norm};
use crate::error::{Error, Result};
use crate::exactnum::rational::{self, pow2, Rational};
use crate::exactnum::{ExactPosReal, MonomialSum};
use crate::series::{Witness, WitnessKind};
use crate::spaces::{BaseIndex, BitString, DyadicInterval, SetExpr, SpaceModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryDirection {
    /// `F`: unit interval to Cantor space.
    ToCantor,
    /// `L`: Cantor space to unit interval.
    ToInterval,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InterleaveDirection {
    /// `G`: Cantor² to Cantor.
    Interleave,
    /// `G⁻¹`: Cantor to Cantor².
    Split,
}

/// Relabels the space of `w` by `tag`: strands, certificates and layout are
/// carried over unchanged; simple-part sets are mapped leaf by leaf.
pub fn apply_map(tag: MapTag, w: &Witness) -> Result<Witness> {
    let mut out = w.clone();
    out.space = push_map(&mut out.chain, &w.space, tag)?;
    out.simple = w
        .simple
        .iter()
        .map(|(c, s)| Ok((c.clone(), map_set(tag, s)?)))
        .collect::<Result<_>>()?;
    if let Value::Object(m) = &mut out.params {
        if out.chain.is_empty() {
            m.remove("transport");
        } else {
            m.insert(
                "transport".into(),
                json!({
                    "native": out.native_space.tag(),
                    "chain": out.chain.iter().map(|t| t.to_string()).collect::<Vec<_>>(),
                }),
            );
        }
    }
    Ok(out)
}

pub fn binary_transport(dir: BinaryDirection, w: &Witness) -> Result<Witness> {
    apply_map(
        match dir {
            BinaryDirection::ToCantor => MapTag::F,
            BinaryDirection::ToInterval => MapTag::L,
        },
        w,
    )
}

pub fn interleave_transport(dir: InterleaveDirection, w: &Witness) -> Result<Witness> {
    apply_map(
        match dir {
            InterleaveDirection::Interleave => MapTag::G,
            InterleaveDirection::Split => MapTag::Ginv,
        },
        w,
    )
}

/// `T(f)(x, y) = f(x, g(y))`: relabels the second factor of a product.
pub fn product_lift(inverse: bool, w: &Witness) -> Result<Witness> {
    apply_map(if inverse { MapTag::Tinv } else { MapTag::T }, w)
}

/// `Φ(a)(x, t) = f(x)·Σ a_n r_n(t)` on `X × [0,1)`.
///
/// The groups of `f` are kept; every piece `P` of `f` splits into the
/// rectangles `P × J` over the level-`K` cells `J`, on which the Rademacher sum
/// is the constant `R_J`. Norms multiply exactly (Fubini).
pub fn tensor_embed(f: &Witness, a: &[Rational]) -> Result<Witness> {
    if a.iter().all(|x| x.is_zero()) {
        return Err(Error::ZeroVector);
    }
    if !f.chain.is_empty() {
        return Err(Error::ModelMismatch("tensor embedding needs a native witness".into()));
    }
    if !f.simple.is_empty() {
        return Err(Error::UnsupportedLeaf("tensor embedding of a simple part".into()));
    }
    let space = SpaceModel::product(f.space.clone(), SpaceModel::UnitInterval);
    let params = json!({
        "recipe": "tensor",
        "base": {
            "space": f.space.tag(),
            "p": rational::render(&f.p),
            "kind": f.kind,
            "params": f.params,
            "horizon": f.horizon,
        },
        "coeffs": a.iter().map(rational::render).collect::<Vec<_>>(),
    });
    if f.is_zero() {
        return Ok(Witness::zero(space, f.p.clone(), WitnessKind::Tensor, params));
    }
    let rad = rademacher_norm(a, &f.p)?;
    let mut out = f.clone();
    out.space = space.clone();
    out.native_space = space;
    out.kind = WitnessKind::Tensor;
    out.params = params;
    out.tensor = Some(a.to_vec());
    out.norm = f.norm.mul_nonneg(&rad.norm);
    out.tail_p = f.tail_p.mul_nonneg(&rad.p_mass.enclose(96));
    out.uniform = f.uniform && level_values(a).iter().all(|v| !v.is_zero());
    Ok(out)
}

/// Exact truncated Fubini identity for a tensor witness: for the first
/// `groups` groups, strands `1..=strands` and pieces `m <= terms`,
/// `Σ_{m,J} |c_m R_J|^p μ_m ℓ(J) = (Σ_m |c_m|^p μ_m)·(Σ_J |R_J|^p ℓ(J))`
/// as formal monomial sums.
pub fn fubini_check(w: &Witness, groups: usize, strands: u64, terms: u64) -> Result<bool> {
    let a = w.tensor.as_ref().ok_or_else(|| Error::ModelMismatch("not a tensor witness".into()))?;
    let k = a.len() as i64;
    let cells: Vec<Rational> = level_values(a);
    let ell = pow2(-k);
    let mut rad = MonomialSum::zero();
    for r in &cells {
        if !r.is_zero() {
            rad.add_monomial(&ExactPosReal::from_rational(r.abs()).pow(&w.p), &ell);
        }
    }
    for g in w.groups.iter().take(groups) {
        let n = g.strand_count().unwrap_or(strands).min(strands);
        for s in 1..=n {
            let strand = g.strand(s);
            let mut left = MonomialSum::zero();
            let mut base = MonomialSum::zero();
            for m in 1..=terms {
                let Some(c) = strand.abs_coeff(m) else { continue };
                let mu = strand.mass(m);
                base.add_monomial(&c.pow(&w.p), &mu);
                for r in &cells {
                    if !r.is_zero() {
                        let cr = c.mul_rational(&r.abs());
                        left.add_monomial(&cr.pow(&w.p), &(&mu * &ell));
                    }
                }
            }
            if left != base.mul(&rad) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Where the witness is certified inside a π-base element `U_n` of its space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Residency {
    /// Native cell whose image lies in `U_n`.
    pub native_cell: SetExpr,
    /// Groups whose whole region lies in the native cell (first factor for tensors).
    pub groups: Vec<u64>,
    /// Tensor witnesses: a level cell `J` inside the second factor with `R_J ≠ 0`.
    pub factor: Option<TensorFactor>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorFactor {
    pub cell: DyadicInterval,
    pub value: Rational,
}

/// A sub-cell `J ⊆ v` at level `max(K, level v)` on which `Σ a_n r_n ≠ 0`.
fn nonzero_cell(a: &[Rational], v: &DyadicInterval) -> Option<TensorFactor> {
    let k = a.len() as u32;
    let lv = v.level();
    let l = k.max(lv);
    let first = v.cell.index() << (l - lv);
    (first..first + (1u64 << (l - lv))).find_map(|j| {
        let value = level_value(a, j >> (l - k));
        (!value.is_zero()).then(|| TensorFactor { cell: DyadicInterval::in_block(0, BitString::from_index(l, j)), value })
    })
}

/// Resolves the resident groups of `U_n` by pulling `U_n` back along the
/// transport chain to a native cell.
pub fn resident(w: &Witness, n: BaseIndex) -> Result<Residency> {
    let u = w.space.enumerate_base(n);
    let native_cell = pull_back_cell(&w.chain, &u)?;
    match (&w.tensor, &native_cell) {
        (Some(a), SetExpr::Rectangle(x, v)) => {
            let v = match v.as_ref() {
                SetExpr::Dyadic(d) => d.clone(),
                other => return Err(Error::UnsupportedLeaf(format!("tensor factor {}", other.to_json()))),
            };
            let factor = nonzero_cell(a, &v);
            let groups = if factor.is_some() {
                w.groups_within(Some(x))?.into_iter().map(|g| g.id).collect()
            } else {
                vec![]
            };
            Ok(Residency { native_cell: native_cell.clone(), groups, factor })
        }
        (Some(_), _) => Err(Error::UnsupportedLeaf("tensor witness off the product model".into())),
        (None, cell) => {
            let groups = w.groups_within(Some(cell))?.into_iter().map(|g| g.id).collect();
            Ok(Residency { native_cell: cell.clone(), groups, factor: None })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::build_ha;
    use crate::exactnum::rational::rat;

    #[test]
    fn roundtrip_is_identity() {
        let w = build_ha(SpaceModel::UnitInterval, rat(1, 1), None, 4).unwrap();
        let c = binary_transport(BinaryDirection::ToCantor, &w).unwrap();
        assert_eq!(c.space, SpaceModel::CantorSpace);
        assert_eq!(c.params["transport"]["chain"][0], "F");
        let back = binary_transport(BinaryDirection::ToInterval, &c).unwrap();
        assert_eq!(back.params, w.params);
        assert_eq!(back.groups, w.groups);
        assert_eq!(back.space, w.space);
        assert!(matches!(interleave_transport(InterleaveDirection::Interleave, &w), Err(Error::ModelMismatch(_))));
    }

    #[test]
    fn residency_follows_the_chain() {
        let w = build_ha(SpaceModel::UnitInterval, rat(1, 1), None, 6).unwrap();
        let c = binary_transport(BinaryDirection::ToCantor, &w).unwrap();
        let s = interleave_transport(InterleaveDirection::Split, &c).unwrap();
        for n in 0..6 {
            let r = resident(&s, n).unwrap();
            assert!(!r.groups.is_empty(), "U_{n}");
        }
    }

    #[test]
    fn tensor_norm_and_fubini() {
        let f = build_ha(SpaceModel::UnitInterval, rat(1, 1), None, 3).unwrap();
        let t = tensor_embed(&f, &[rat(1, 1)]).unwrap();
        assert_eq!(t.norm, f.norm);
        let t = tensor_embed(&f, &[rat(3, 5), rat(4, 5)]).unwrap();
        assert!(t.uniform);
        assert!(fubini_check(&t, 2, 2, 12).unwrap());
        assert!(matches!(tensor_embed(&f, &[rat(0, 1)]), Err(Error::ZeroVector)));
        let r = resident(&t, crate::spaces::pair(1, 2)).unwrap();
        assert!(r.factor.is_some() && !r.groups.is_empty());
    }
}
