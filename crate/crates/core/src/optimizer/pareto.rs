//! Dominance, non-dominated sorting and the cross-generation Pareto archive.

use std::io;

use serde::Serialize;

use super::{Fitness, Individual, OptError};
use crate::network::ReversalMask;

/// `f` dominates `g`: no worse in both objectives (z1 up, z2 down) and
/// strictly better in at least one.
pub fn dominates(f: &Fitness, g: &Fitness) -> bool {
    f.z1 >= g.z1 && f.z2 <= g.z2 && (f.z1 > g.z1 || f.z2 < g.z2)
}

/// Front index of every fitness (0 = non-dominated), via the
/// domination-count bookkeeping of fast non-dominated sorting.
pub fn non_dominated_ranks(fitness: &[Fitness]) -> Vec<usize> {
    let n = fitness.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&fitness[i], &fitness[j]) {
                dominated_by_me[i].push(j);
                domination_count[j] += 1;
            } else if dominates(&fitness[j], &fitness[i]) {
                dominated_by_me[j].push(i);
                domination_count[i] += 1;
            }
        }
    }
    let mut rank = vec![usize::MAX; n];
    let mut front: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    let mut level = 0;
    while !front.is_empty() {
        let mut next = Vec::new();
        for &i in &front {
            rank[i] = level;
            for &j in &dominated_by_me[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        front = next;
        level += 1;
    }
    rank
}

/// Sorts a population into fronts, storing each individual's rank.
pub fn non_dominated_sort(pop: &mut [Individual]) -> Result<Vec<Vec<usize>>, OptError> {
    let fitness = pop
        .iter()
        .enumerate()
        .map(|(i, ind)| ind.fitness.ok_or(OptError::Unevaluated(i)))
        .collect::<Result<Vec<_>, _>>()?;
    let ranks = non_dominated_ranks(&fitness);
    let fronts_len = ranks.iter().max().map_or(0, |m| m + 1);
    let mut fronts = vec![Vec::new(); fronts_len];
    for (i, (ind, &r)) in pop.iter_mut().zip(&ranks).enumerate() {
        ind.rank = Some(r);
        fronts[r].push(i);
    }
    Ok(fronts)
}

#[derive(Serialize)]
struct ParetoRow<'a> {
    mask_bits: &'a str,
    z1_ms: f64,
    z2: usize,
}

/// Mutually non-dominated `(mask, fitness)` pairs gathered over a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParetoArchive {
    members: Vec<(ReversalMask, Fitness)>,
}

impl ParetoArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Offers a candidate. Returns whether it was admitted; admitted
    /// candidates evict every member they dominate.
    pub fn insert(&mut self, mask: &ReversalMask, fitness: Fitness) -> bool {
        if self
            .members
            .iter()
            .any(|(m, f)| m == mask || dominates(f, &fitness))
        {
            return false;
        }
        self.members.retain(|(_, f)| !dominates(&fitness, f));
        self.members.push((mask.clone(), fitness));
        true
    }

    pub fn contains(&self, mask: &ReversalMask) -> bool {
        self.members.iter().any(|(m, _)| m == mask)
    }

    /// Members ordered by z2 ascending, then z1 descending, then mask bits.
    pub fn sorted(&self) -> Vec<(ReversalMask, Fitness)> {
        let mut out = self.members.clone();
        out.sort_by(|(ma, fa), (mb, fb)| {
            fa.z2
                .cmp(&fb.z2)
                .then(fb.z1.total_cmp(&fa.z1))
                .then(ma.cmp(mb))
        });
        out
    }

    pub fn is_mutually_non_dominated(&self) -> bool {
        self.members.iter().all(|(_, f)| {
            self.members.iter().all(|(_, g)| !dominates(f, g))
        })
    }

    /// Writes `mask_bits,z1_ms,z2` rows in [`Self::sorted`] order after
    /// re-checking that no row dominates another.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), OptError> {
        if !self.is_mutually_non_dominated() {
            return Err(OptError::Config("archive holds a dominated member".into()));
        }
        let mut w = csv::Writer::from_writer(out);
        for (mask, f) in self.sorted() {
            let bits = mask.to_string();
            w.serialize(ParetoRow { mask_bits: &bits, z1_ms: f.z1, z2: f.z2 })?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(z1: f64, z2: usize) -> Fitness {
        Fitness { z1, z2 }
    }

    #[test]
    fn dominance_examples() {
        assert!(dominates(&fit(10.0, 2), &fit(8.0, 3)));
        assert!(!dominates(&fit(10.0, 2), &fit(10.0, 2)));
        assert!(!dominates(&fit(10.0, 2), &fit(12.0, 1)));
        assert!(dominates(&fit(12.0, 1), &fit(10.0, 2)));
        assert!(dominates(&fit(10.0, 1), &fit(10.0, 2)));
    }

    #[test]
    fn sorting_examples() {
        let front = [fit(1.0, 0), fit(2.0, 1), fit(3.0, 2)];
        assert_eq!(non_dominated_ranks(&front), vec![0, 0, 0]);
        let chain = [fit(1.0, 3), fit(3.0, 1), fit(2.0, 2)];
        assert_eq!(non_dominated_ranks(&chain), vec![2, 0, 1]);
    }

    #[test]
    fn sort_requires_fitness() {
        let mut pop = vec![Individual::new(ReversalMask::zeros(2))];
        assert!(matches!(non_dominated_sort(&mut pop), Err(OptError::Unevaluated(0))));
    }

    #[test]
    fn archive_admission_rules() {
        let m = |s: &str| s.parse::<ReversalMask>().unwrap();
        let mut a = ParetoArchive::new();
        assert!(a.insert(&m("00"), fit(10.0, 0)));
        assert!(a.insert(&m("01"), fit(12.0, 1)));
        // Dominated and duplicate candidates are no-ops.
        assert!(!a.insert(&m("10"), fit(11.0, 1)));
        assert!(!a.insert(&m("01"), fit(12.0, 1)));
        assert_eq!(a.len(), 2);
        // A dominating candidate evicts.
        assert!(a.insert(&m("10"), fit(13.0, 1)));
        assert_eq!(a.len(), 2);
        assert!(!a.contains(&m("01")));
        assert!(a.is_mutually_non_dominated());
    }

    #[test]
    fn pareto_csv_format() {
        let mut a = ParetoArchive::new();
        a.insert(&"01".parse().unwrap(), fit(12.5, 1));
        a.insert(&"00".parse().unwrap(), fit(10.0, 0));
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "mask_bits,z1_ms,z2\n00,10.0,0\n01,12.5,1\n");
    }
}
