//! Binary tournament selection, one-point crossover and single-bit mutation.

use rand::Rng;

use super::{Individual, OptError};
use crate::network::ReversalMask;

/// Draws two distinct individuals uniformly and keeps the lower rank; equal
/// ranks are settled by a fair coin.
pub fn tournament_select<'a, R: Rng + ?Sized>(
    pop: &'a [Individual],
    rng: &mut R,
) -> Result<&'a Individual, OptError> {
    if pop.len() < 2 {
        return Err(OptError::PopulationTooSmall(pop.len()));
    }
    let picks = rand::seq::index::sample(rng, pop.len(), 2);
    let (a, b) = (&pop[picks.index(0)], &pop[picks.index(1)]);
    let rank = |ind: &Individual, i: usize| ind.rank.ok_or(OptError::Unranked(i));
    let (ra, rb) = (rank(a, picks.index(0))?, rank(b, picks.index(1))?);
    Ok(match ra.cmp(&rb) {
        std::cmp::Ordering::Less => a,
        std::cmp::Ordering::Greater => b,
        std::cmp::Ordering::Equal => {
            if rng.gen_bool(0.5) {
                a
            } else {
                b
            }
        }
    })
}

/// Swaps the tails of two masks after position `cut`.
pub fn crossover_at(
    p1: &ReversalMask,
    p2: &ReversalMask,
    cut: usize,
) -> (ReversalMask, ReversalMask) {
    let (a, b) = (p1.bits(), p2.bits());
    let c1 = a[..cut].iter().chain(&b[cut..]).copied().collect();
    let c2 = b[..cut].iter().chain(&a[cut..]).copied().collect();
    (ReversalMask::from_bits(c1), ReversalMask::from_bits(c2))
}

/// With probability `pc`, cuts both parents at a uniform point in
/// `[1, N-1]` and swaps tails; otherwise returns copies.
pub fn one_point_crossover<R: Rng + ?Sized>(
    p1: &ReversalMask,
    p2: &ReversalMask,
    pc: f64,
    rng: &mut R,
) -> Result<(ReversalMask, ReversalMask), OptError> {
    if p1.len() != p2.len() {
        return Err(OptError::LengthMismatch(p1.len(), p2.len()));
    }
    if p1.len() < 2 {
        return Err(OptError::Config(format!("crossover needs masks of length >= 2, got {}", p1.len())));
    }
    if rng.gen_bool(pc) {
        let cut = rng.gen_range(1..p1.len());
        Ok(crossover_at(p1, p2, cut))
    } else {
        Ok((p1.clone(), p2.clone()))
    }
}

/// With probability `pm`, flips one uniformly chosen bit.
pub fn mutate<R: Rng + ?Sized>(mask: &ReversalMask, pm: f64, rng: &mut R) -> ReversalMask {
    let mut out = mask.clone();
    if !out.is_empty() && rng.gen_bool(pm) {
        let i = rng.gen_range(0..out.len());
        out.flip(i);
    }
    out
}
