//! Dense two-phase simplex over exact rationals.
//!
//! Pivoting follows Bland's rule (lowest-index entering column, lowest-index
//! leaving basic variable on ratio ties), which cannot cycle. Intended for the
//! small programs that arise on enumeration-scale grids.

use num_traits::{One, Signed, Zero};

use crate::rational::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<(usize, Rational)>,
    pub relation: Relation,
    pub rhs: Rational,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { value: Rational, solution: Vec<Rational> },
    Infeasible,
    Unbounded,
}

/// Minimize `objective · x` subject to the constraints and `x >= 0`.
#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    num_vars: usize,
    constraints: Vec<Constraint>,
    objective: Vec<(usize, Rational)>,
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        Self { num_vars, constraints: Vec::new(), objective: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, Rational)>, relation: Relation, rhs: Rational) {
        debug_assert!(coeffs.iter().all(|(j, _)| *j < self.num_vars));
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    pub fn set_objective(&mut self, objective: Vec<(usize, Rational)>) {
        self.objective = objective;
    }

    pub fn solve(&self) -> LpOutcome {
        let mut tableau = Tableau::build(self);
        if !tableau.phase_one() {
            return LpOutcome::Infeasible;
        }
        let mut cost = vec![Rational::zero(); tableau.cols];
        for (j, c) in &self.objective {
            cost[*j] += c;
        }
        if !tableau.optimize(&cost) {
            return LpOutcome::Unbounded;
        }
        let solution = tableau.primal(self.num_vars);
        let value = self.objective.iter().map(|(j, c)| c * &solution[*j]).sum();
        LpOutcome::Optimal { value, solution }
    }

    /// Phase one only.
    pub fn is_feasible(&self) -> bool {
        Tableau::build(self).phase_one()
    }
}

/// A constraint row after sign normalization: coefficients, relation, right-hand side.
type Row = (Vec<(usize, Rational)>, Relation, Rational);

struct Tableau {
    rows: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    /// Reduced costs, with the negated objective value in the last slot.
    objective: Vec<Rational>,
    cols: usize,
    first_artificial: usize,
    allowed: Vec<bool>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.constraints.len();
        let n = lp.num_vars;
        let num_slack = lp.constraints.iter().filter(|c| c.relation != Relation::Eq).count();
        let first_artificial = n + num_slack;

        // Normalize to non-negative right-hand sides first, to know which
        // rows need an artificial variable.
        let normalized: Vec<Row> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs.is_negative() {
                    let flipped = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (c.coeffs.iter().map(|(j, a)| (*j, -a)).collect(), flipped, -&c.rhs)
                } else {
                    (c.coeffs.clone(), c.relation, c.rhs.clone())
                }
            })
            .collect();
        let num_artificial = normalized.iter().filter(|(_, r, _)| *r != Relation::Le).count();
        let cols = first_artificial + num_artificial;

        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut slack = n;
        let mut artificial = first_artificial;
        for (coeffs, relation, rhs) in normalized {
            let mut row = vec![Rational::zero(); cols + 1];
            for (j, a) in coeffs {
                row[j] += a;
            }
            row[cols] = rhs;
            match relation {
                Relation::Le => {
                    row[slack] = Rational::one();
                    basis.push(slack);
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -Rational::one();
                    slack += 1;
                    row[artificial] = Rational::one();
                    basis.push(artificial);
                    artificial += 1;
                }
                Relation::Eq => {
                    row[artificial] = Rational::one();
                    basis.push(artificial);
                    artificial += 1;
                }
            }
            rows.push(row);
        }
        Self {
            rows,
            basis,
            objective: vec![Rational::zero(); cols + 1],
            cols,
            first_artificial,
            allowed: vec![true; cols],
        }
    }

    /// Drives the artificial variables to zero; false when infeasible.
    fn phase_one(&mut self) -> bool {
        if self.first_artificial == self.cols {
            return true;
        }
        let mut cost = vec![Rational::zero(); self.cols];
        for c in cost.iter_mut().skip(self.first_artificial) {
            *c = Rational::one();
        }
        let bounded = self.optimize(&cost);
        debug_assert!(bounded, "phase one objective is bounded below by zero");
        if !self.objective[self.cols].is_zero() {
            return false;
        }
        // Pivot remaining (zero-valued) artificials out of the basis.
        let mut r = 0;
        while r < self.rows.len() {
            if self.basis[r] >= self.first_artificial {
                match (0..self.first_artificial).find(|&j| !self.rows[r][j].is_zero()) {
                    Some(j) => self.pivot(r, j),
                    None => {
                        // redundant row
                        self.rows.swap_remove(r);
                        self.basis.swap_remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
        for a in self.allowed.iter_mut().skip(self.first_artificial) {
            *a = false;
        }
        true
    }

    /// Runs simplex iterations for `cost`; false when unbounded.
    fn optimize(&mut self, cost: &[Rational]) -> bool {
        let cols = self.cols;
        let mut objective = vec![Rational::zero(); cols + 1];
        objective[..cols].clone_from_slice(cost);
        for (r, &b) in self.basis.iter().enumerate() {
            if cost[b].is_zero() {
                continue;
            }
            let cb = cost[b].clone();
            for (o, a) in objective.iter_mut().zip(&self.rows[r]) {
                if !a.is_zero() {
                    *o -= &cb * a;
                }
            }
        }
        self.objective = objective;

        loop {
            let Some(entering) = (0..cols).find(|&j| self.allowed[j] && self.objective[j].is_negative()) else {
                return true;
            };
            let mut leaving: Option<(usize, Rational)> = None;
            for r in 0..self.rows.len() {
                let a = &self.rows[r][entering];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.rows[r][cols] / a;
                let better = match &leaving {
                    None => true,
                    Some((best_r, best)) => ratio < *best || (ratio == *best && self.basis[r] < self.basis[*best_r]),
                };
                if better {
                    leaving = Some((r, ratio));
                }
            }
            match leaving {
                Some((r, _)) => self.pivot(r, entering),
                None => return false,
            }
        }
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let inv = Rational::one() / &self.rows[r][col];
        for a in self.rows[r].iter_mut() {
            if !a.is_zero() {
                *a *= &inv;
            }
        }
        let pivot_row = std::mem::take(&mut self.rows[r]);
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[col].is_zero() {
                continue;
            }
            let factor = row[col].clone();
            eliminate(row, &pivot_row, &factor);
        }
        if !self.objective[col].is_zero() {
            let factor = self.objective[col].clone();
            eliminate(&mut self.objective, &pivot_row, &factor);
        }
        self.rows[r] = pivot_row;
        self.basis[r] = col;
    }

    fn primal(&self, num_vars: usize) -> Vec<Rational> {
        let mut x = vec![Rational::zero(); num_vars];
        for (r, &b) in self.basis.iter().enumerate() {
            if b < num_vars {
                x[b] = self.rows[r][self.cols].clone();
            }
        }
        x
    }
}

fn eliminate(row: &mut [Rational], pivot_row: &[Rational], factor: &Rational) {
    for (a, p) in row.iter_mut().zip(pivot_row) {
        if !p.is_zero() {
            *a -= factor * p;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    #[test]
    fn small_maximization() {
        // max 3x + 2y s.t. x + y <= 4, x + 3y <= 6, x <= 3  -> (3, 1), value 11
        let mut lp = LinearProgram::new(2);
        lp.add_constraint(vec![(0, int(1)), (1, int(1))], Relation::Le, int(4));
        lp.add_constraint(vec![(0, int(1)), (1, int(3))], Relation::Le, int(6));
        lp.add_constraint(vec![(0, int(1))], Relation::Le, int(3));
        lp.set_objective(vec![(0, int(-3)), (1, int(-2))]);
        match lp.solve() {
            LpOutcome::Optimal { value, solution } => {
                assert_eq!(value, int(-11));
                assert_eq!(solution, vec![int(3), int(1)]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ge_and_eq_rows_with_fractional_optimum() {
        // min x + y s.t. 2x + y >= 3, x + 3y >= 4, x - y = 0 -> x = y = 1
        let mut lp = LinearProgram::new(2);
        lp.add_constraint(vec![(0, int(2)), (1, int(1))], Relation::Ge, int(3));
        lp.add_constraint(vec![(0, int(1)), (1, int(3))], Relation::Ge, int(4));
        lp.add_constraint(vec![(0, int(1)), (1, int(-1))], Relation::Eq, int(0));
        lp.set_objective(vec![(0, int(1)), (1, int(1))]);
        assert_eq!(lp.solve(), LpOutcome::Optimal { value: int(2), solution: vec![int(1), int(1)] });

        // min x s.t. 3x >= 1 -> 1/3
        let mut lp = LinearProgram::new(1);
        lp.add_constraint(vec![(0, int(3))], Relation::Ge, int(1));
        lp.set_objective(vec![(0, int(1))]);
        assert_eq!(lp.solve(), LpOutcome::Optimal { value: ratio(1, 3), solution: vec![ratio(1, 3)] });
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1);
        lp.add_constraint(vec![(0, int(1))], Relation::Le, int(1));
        lp.add_constraint(vec![(0, int(1))], Relation::Ge, int(2));
        assert_eq!(lp.solve(), LpOutcome::Infeasible);
        assert!(!lp.is_feasible());

        let mut lp = LinearProgram::new(2);
        lp.add_constraint(vec![(0, int(1)), (1, int(-1))], Relation::Le, int(1));
        lp.set_objective(vec![(1, int(-1))]);
        assert_eq!(lp.solve(), LpOutcome::Unbounded);
    }

    #[test]
    fn negative_rhs_and_redundant_equalities() {
        // -x <= -2  (x >= 2), x + y = 5, 2x + 2y = 10 (redundant); min y -> y = 0? no: x<=5
        let mut lp = LinearProgram::new(2);
        lp.add_constraint(vec![(0, int(-1))], Relation::Le, int(-2));
        lp.add_constraint(vec![(0, int(1)), (1, int(1))], Relation::Eq, int(5));
        lp.add_constraint(vec![(0, int(2)), (1, int(2))], Relation::Eq, int(10));
        lp.set_objective(vec![(0, int(1))]);
        assert_eq!(lp.solve(), LpOutcome::Optimal { value: int(2), solution: vec![int(2), int(3)] });
    }

    #[test]
    fn degenerate_program_terminates() {
        // classic cycling example (Beale); Bland's rule must terminate
        let mut lp = LinearProgram::new(4);
        lp.add_constraint(vec![(0, ratio(1, 4)), (1, int(-60)), (2, ratio(-1, 25)), (3, int(9))], Relation::Le, int(0));
        lp.add_constraint(vec![(0, ratio(1, 2)), (1, int(-90)), (2, ratio(-1, 50)), (3, int(3))], Relation::Le, int(0));
        lp.add_constraint(vec![(2, int(1))], Relation::Le, int(1));
        lp.set_objective(vec![(0, ratio(-3, 4)), (1, int(150)), (2, ratio(-1, 50)), (3, int(6))]);
        match lp.solve() {
            LpOutcome::Optimal { value, .. } => assert_eq!(value, ratio(-1, 20)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_program_is_feasible() {
        let lp = LinearProgram::new(3);
        assert!(lp.is_feasible());
        assert_eq!(lp.solve(), LpOutcome::Optimal { value: int(0), solution: vec![int(0); 3] });
    }
}
