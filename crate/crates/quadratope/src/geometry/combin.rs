//! Vertex-facet combinatorics.
//!
//! Two simple polytopes are combinatorially equivalent when some facet
//! relabeling carries the vertex-facet incidence of one onto the other.
//! Matching is a backtracking search over degree-compatible facet
//! assignments; fine for the intended scale (m up to ~10 without a hint) and
//! guarded by an explicit node budget beyond it.

use crate::error::{Error, Result};
use crate::geometry::Polytope;

/// Vertex-facet incidence: for each vertex, the sorted facets through it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Incidence {
    pub m: usize,
    pub vertex_sets: Vec<Vec<usize>>,
}

impl Polytope {
    pub fn incidence(&self) -> Incidence {
        Incidence {
            m: self.m(),
            vertex_sets: self.vertices().iter().map(|v| v.active.clone()).collect(),
        }
    }
}

impl Incidence {
    /// Number of vertices on each facet.
    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.m];
        for set in &self.vertex_sets {
            for &f in set {
                d[f] += 1;
            }
        }
        d
    }

    fn sorted_sets(&self) -> Vec<Vec<usize>> {
        let mut sets = self.vertex_sets.clone();
        sets.sort();
        sets
    }

    /// Image of the incidence under a facet relabeling, in sorted order.
    fn relabeled(&self, sigma: &[usize]) -> Vec<Vec<usize>> {
        let mut sets: Vec<Vec<usize>> = self
            .vertex_sets
            .iter()
            .map(|set| {
                let mut s: Vec<usize> = set.iter().map(|&f| sigma[f]).collect();
                s.sort_unstable();
                s
            })
            .collect();
        sets.sort();
        sets
    }

    /// Canonical form: the lexicographically smallest relabeled incidence
    /// over facet relabelings that hand out labels in blocks of equal facet
    /// degree, highest degree first. The allowed relabelings are defined by
    /// the incidence itself, so isomorphic incidences get identical forms;
    /// equal canonical forms mean equal combinatorial types.
    pub fn canonical(&self, budget: u64) -> Result<Vec<Vec<usize>>> {
        let degrees = self.degrees();
        let mut order: Vec<usize> = (0..self.m).collect();
        order.sort_by_key(|&f| (usize::MAX - degrees[f], f));
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        for &f in &order {
            match blocks.last_mut() {
                Some(last) if degrees[last[0]] == degrees[f] => last.push(f),
                _ => blocks.push(vec![f]),
            }
        }

        struct Search<'a> {
            inc: &'a Incidence,
            blocks: Vec<Vec<usize>>,
            sigma: Vec<usize>,
            best: Option<Vec<Vec<usize>>>,
            nodes: u64,
            budget: u64,
        }
        impl Search<'_> {
            fn run(&mut self, block: usize, offset: usize, label: usize) -> Result<()> {
                if block == self.blocks.len() {
                    self.nodes += 1;
                    if self.nodes > self.budget {
                        return Err(Error::SearchBudgetExceeded {
                            budget: self.budget,
                        });
                    }
                    let image = self.inc.relabeled(&self.sigma);
                    if self.best.as_ref().map_or(true, |b| image < *b) {
                        self.best = Some(image);
                    }
                    return Ok(());
                }
                if offset == self.blocks[block].len() {
                    return self.run(block + 1, 0, label);
                }
                for k in offset..self.blocks[block].len() {
                    let facet = self.blocks[block][k];
                    self.blocks[block].swap(offset, k);
                    self.sigma[facet] = label;
                    self.run(block, offset + 1, label + 1)?;
                    self.sigma[facet] = usize::MAX;
                    self.blocks[block].swap(offset, k);
                }
                Ok(())
            }
        }

        let mut search = Search {
            inc: self,
            blocks,
            sigma: vec![usize::MAX; self.m],
            best: None,
            nodes: 0,
            budget,
        };
        search.run(0, 0, 0)?;
        Ok(search.best.expect("at least one relabeling exists"))
    }
}

/// Backtracking over facet bijections P -> Q consistent with the incidences.
/// `on_match` receives each complete bijection; returning false stops the
/// search. Branches are pruned by facet degree and by checking every
/// fully-assigned vertex set against Q's sets.
fn enumerate_matchings(
    p: &Incidence,
    q: &Incidence,
    nodes: &mut u64,
    budget: u64,
    on_match: &mut dyn FnMut(&[usize]) -> bool,
) -> Result<()> {
    let m = p.m;
    let pd = p.degrees();
    let qd = q.degrees();
    let q_sets = q.sorted_sets();
    let mut sigma = vec![usize::MAX; m];
    let mut used = vec![false; m];

    fn recurse(
        facet: usize,
        p: &Incidence,
        q_sets: &[Vec<usize>],
        pd: &[usize],
        qd: &[usize],
        sigma: &mut Vec<usize>,
        used: &mut Vec<bool>,
        nodes: &mut u64,
        budget: u64,
        on_match: &mut dyn FnMut(&[usize]) -> bool,
    ) -> Result<bool> {
        let m = p.m;
        if facet == m {
            return Ok(on_match(sigma));
        }
        for target in 0..m {
            if used[target] || pd[facet] != qd[target] {
                continue;
            }
            *nodes += 1;
            if *nodes > budget {
                return Err(Error::SearchBudgetExceeded { budget });
            }
            sigma[facet] = target;
            used[target] = true;
            let consistent = p.vertex_sets.iter().all(|set| {
                if set.iter().any(|&f| sigma[f] == usize::MAX) {
                    return true; // not fully assigned yet
                }
                let mut image: Vec<usize> = set.iter().map(|&f| sigma[f]).collect();
                image.sort_unstable();
                q_sets.binary_search(&image).is_ok()
            });
            if consistent {
                let keep = recurse(
                    facet + 1,
                    p,
                    q_sets,
                    pd,
                    qd,
                    sigma,
                    used,
                    nodes,
                    budget,
                    on_match,
                )?;
                if !keep {
                    sigma[facet] = usize::MAX;
                    used[target] = false;
                    return Ok(false);
                }
            }
            sigma[facet] = usize::MAX;
            used[target] = false;
        }
        Ok(true)
    }

    recurse(
        0, p, &q_sets, &pd, &qd, &mut sigma, &mut used, nodes, budget, on_match,
    )?;
    Ok(())
}

pub const DEFAULT_MATCH_BUDGET: u64 = 10_000_000;

/// Verify that a claimed facet bijection carries P's incidence onto Q's.
pub fn verify_matching(p: &Incidence, q: &Incidence, sigma: &[usize]) -> Result<()> {
    if sigma.len() != p.m || p.m != q.m {
        return Err(Error::NotEquivalent {
            reason: format!("facet counts differ: {} vs {}", p.m, q.m),
        });
    }
    let mut seen = vec![false; p.m];
    for &t in sigma {
        if t >= p.m || seen[t] {
            return Err(Error::NotEquivalent {
                reason: "claimed pairing is not a bijection".into(),
            });
        }
        seen[t] = true;
    }
    if p.relabeled(sigma) != q.sorted_sets() {
        return Err(Error::NotEquivalent {
            reason: "claimed pairing does not carry the incidence over".into(),
        });
    }
    Ok(())
}

/// Find a facet bijection realizing a combinatorial equivalence P -> Q.
/// With a hint the claim is only verified; without one the search runs under
/// the node budget.
pub fn match_combinatorics(
    p: &Incidence,
    q: &Incidence,
    hint: Option<&[usize]>,
    budget: u64,
) -> Result<Vec<usize>> {
    if let Some(sigma) = hint {
        verify_matching(p, q, sigma)?;
        return Ok(sigma.to_vec());
    }
    if p.m != q.m || p.vertex_sets.len() != q.vertex_sets.len() {
        return Err(Error::NotEquivalent {
            reason: format!(
                "shape mismatch: {} facets / {} vertices vs {} facets / {} vertices",
                p.m,
                p.vertex_sets.len(),
                q.m,
                q.vertex_sets.len()
            ),
        });
    }
    let mut pd = p.degrees();
    let mut qd = q.degrees();
    pd.sort_unstable();
    qd.sort_unstable();
    if pd != qd {
        return Err(Error::NotEquivalent {
            reason: "facet degree multisets differ".into(),
        });
    }
    let mut found: Option<Vec<usize>> = None;
    let mut nodes = 0u64;
    enumerate_matchings(p, q, &mut nodes, budget, &mut |sigma| {
        found = Some(sigma.to_vec());
        false
    })?;
    found.ok_or(Error::NotEquivalent {
        reason: "no facet bijection carries the incidence over".into(),
    })
}

/// All facet bijections realizing the equivalence, up to `limit` of them.
pub fn all_matchings(
    p: &Incidence,
    q: &Incidence,
    budget: u64,
    limit: usize,
) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut nodes = 0u64;
    enumerate_matchings(p, q, &mut nodes, budget, &mut |sigma| {
        out.push(sigma.to_vec());
        out.len() < limit
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fixtures;

    #[test]
    fn square_and_quadrilateral_are_equivalent() {
        let p = fixtures::square().incidence();
        let q = fixtures::quadrilateral().incidence();
        let sigma = match_combinatorics(&p, &q, None, DEFAULT_MATCH_BUDGET).unwrap();
        verify_matching(&p, &q, &sigma).unwrap();
        assert_eq!(
            p.canonical(DEFAULT_MATCH_BUDGET).unwrap(),
            q.canonical(DEFAULT_MATCH_BUDGET).unwrap()
        );
    }

    #[test]
    fn square_is_not_a_pentagon() {
        let p = fixtures::square().incidence();
        let q = fixtures::pentagon().incidence();
        match match_combinatorics(&p, &q, None, DEFAULT_MATCH_BUDGET) {
            Err(Error::NotEquivalent { .. }) => {}
            other => panic!("expected NotEquivalent, got {other:?}"),
        }
    }

    #[test]
    fn cube_and_prism_differ() {
        let p = fixtures::cube().incidence();
        let q = fixtures::prism().incidence();
        assert!(match_combinatorics(&p, &q, None, DEFAULT_MATCH_BUDGET).is_err());
    }

    #[test]
    fn hint_verification_rejects_wrong_pairing() {
        let p = fixtures::square().incidence();
        // swapping one parallel pair with one orthogonal facet breaks incidence
        let bad = vec![2, 1, 0, 3];
        assert!(match_combinatorics(&p, &p, Some(&bad), DEFAULT_MATCH_BUDGET).is_err());
        let good = vec![1, 0, 2, 3]; // reflecting x is an automorphism
        match_combinatorics(&p, &p, Some(&good), DEFAULT_MATCH_BUDGET).unwrap();
    }

    #[test]
    fn square_automorphisms_number_eight() {
        let p = fixtures::square().incidence();
        let autos = all_matchings(&p, &p, DEFAULT_MATCH_BUDGET, 100).unwrap();
        assert_eq!(autos.len(), 8); // dihedral group of the square
    }

    #[test]
    fn quadrilateral_has_trivial_symmetry_only_combinatorially() {
        // combinatorially every quadrilateral is a square, so eight matchings
        let p = fixtures::quadrilateral().incidence();
        let autos = all_matchings(&p, &p, DEFAULT_MATCH_BUDGET, 100).unwrap();
        assert_eq!(autos.len(), 8);
    }

    #[test]
    fn tiny_budget_trips_the_guard() {
        let p = fixtures::cube().incidence();
        match match_combinatorics(&p, &p, None, 3) {
            Err(Error::SearchBudgetExceeded { budget: 3 }) => {}
            other => panic!("expected SearchBudgetExceeded, got {other:?}"),
        }
    }
}
