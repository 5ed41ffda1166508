//! Expansion of nonlinear atoms into graph implementations.

use crate::cone::ConeKind;
use crate::expr::{check_dpp, Atom, AtomId, Declaration, Expr, LeafAttrs, Node, Problem, Relation, Sense};
use crate::shape::Shape;

use super::CanonError;

/// `expr ∈ cone`, with `expr` affine in variables and parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeConstraint {
    pub cone: ConeKind,
    pub expr: Expr,
}

/// A problem whose expressions contain only affine atoms.
#[derive(Clone, Debug, PartialEq)]
pub struct LoweredProblem {
    /// Affine scalar to minimize.
    pub objective: Expr,
    /// `-1` when the source problem was a maximization.
    pub objective_sign: f64,
    pub constraints: Vec<ConeConstraint>,
    pub user_variables: Vec<Declaration>,
    /// Epigraph variables `#t0, #t1, ...` in creation order.
    pub aux_variables: Vec<Declaration>,
    pub parameters: Vec<Declaration>,
}

/// Verifies DPP compliance, then lowers.
pub fn lower(problem: &Problem) -> Result<LoweredProblem, CanonError> {
    let report = check_dpp(problem);
    if !report.valid {
        return Err(CanonError::NotDpp(report));
    }
    lower_unchecked(problem)
}

/// Lowers without the DPP check. The result is only meaningful for DPP problems.
pub fn lower_unchecked(problem: &Problem) -> Result<LoweredProblem, CanonError> {
    let mut l = Lowerer::default();
    let (objective, objective_sign) = match problem.sense() {
        Sense::Minimize => (problem.objective().clone(), 1.0),
        Sense::Maximize => (problem.objective().neg(), -1.0),
    };
    let objective = l.expr(&objective)?;
    for c in problem.constraints() {
        let g = l.expr(&c.lhs().sub(c.rhs())?)?;
        match c.relation() {
            Relation::Eq => l.push(ConeKind::Zero, g),
            Relation::Le | Relation::Ge => l.push(ConeKind::Nonneg, g.neg()),
        }
    }
    for v in problem.variables() {
        let x = Expr::variable_with(&v.name, v.shape.clone(), v.attrs);
        if v.attrs.nonneg {
            l.push(ConeKind::Nonneg, x.clone());
        }
        if v.attrs.nonpos {
            l.push(ConeKind::Nonneg, x.neg());
        }
    }
    Ok(LoweredProblem {
        objective,
        objective_sign,
        constraints: l.constraints,
        user_variables: problem.variables().to_vec(),
        aux_variables: l.aux,
        parameters: problem.parameters().to_vec(),
    })
}

#[derive(Default)]
struct Lowerer {
    aux: Vec<Declaration>,
    constraints: Vec<ConeConstraint>,
}

impl Lowerer {
    fn push(&mut self, cone: ConeKind, expr: Expr) {
        self.constraints.push(ConeConstraint { cone, expr });
    }

    fn fresh(&mut self, shape: Shape) -> Expr {
        let name = format!("#t{}", self.aux.len());
        self.aux.push(Declaration {
            name: name.clone(),
            shape: shape.clone(),
            attrs: LeafAttrs::NONE,
        });
        Expr::variable(&name, shape)
    }

    fn expr(&mut self, e: &Expr) -> Result<Expr, CanonError> {
        let Node::Apply { atom, args } = e.node() else {
            return Ok(e.clone());
        };
        let args = args.iter().map(|a| self.expr(a)).collect::<Result<Vec<_>, _>>()?;
        if atom.id().is_affine() {
            return Ok(Expr::make_node(atom.clone(), args)?);
        }
        let one = Expr::scalar(1.0);
        Ok(match atom {
            Atom::Norm2 => {
                let t = self.fresh(Shape::scalar());
                self.push(ConeKind::Soc, Expr::vstack(&[t.clone(), args[0].vec()])?);
                t
            }
            Atom::SumSquares => {
                // (1 + t, 1 - t, 2 vec(e)) ∈ SOC  ⇔  ‖e‖² ≤ t
                let t = self.fresh(Shape::scalar());
                let stacked = Expr::vstack(&[one.add(&t)?, one.sub(&t)?, args[0].vec().scale(2.0)])?;
                self.push(ConeKind::Soc, stacked);
                t
            }
            Atom::Abs => {
                let t = self.fresh(args[0].shape().clone());
                self.push(ConeKind::Nonneg, t.sub(&args[0])?);
                self.push(ConeKind::Nonneg, t.add(&args[0])?);
                t
            }
            Atom::Maximum => {
                let t = self.fresh(args[0].shape().clone());
                self.push(ConeKind::Nonneg, t.sub(&args[0])?);
                self.push(ConeKind::Nonneg, t.sub(&args[1])?);
                t
            }
            other => {
                return Err(CanonError::Internal(format!(
                    "no graph implementation for {}",
                    other.id()
                )));
            }
        })
    }
}

/// True when no nonlinear atom remains.
pub(crate) fn is_affine_tree(e: &Expr) -> bool {
    match e.node() {
        Node::Leaf(_) => true,
        Node::Apply { atom, args } => {
            !matches!(
                atom.id(),
                AtomId::Norm2 | AtomId::SumSquares | AtomId::Abs | AtomId::Maximum
            ) && args.iter().all(is_affine_tree)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{Array, Values};
    use crate::expr::{evaluate, Constraint};

    #[test]
    fn epigraph_variables_are_created_in_order() {
        let x = Expr::variable("x", Shape::vector(2));
        let obj = x.norm2().add(&x.abs().sum()).unwrap();
        let pb = Problem::new(Sense::Minimize, obj, vec![]).unwrap();
        let l = lower(&pb).unwrap();
        let names: Vec<_> = l.aux_variables.iter().map(|d| d.name.as_str()).collect();
        assert_eq!(names, ["#t0", "#t1"]);
        assert_eq!(l.aux_variables[1].shape, Shape::vector(2));
        let kinds: Vec<_> = l.constraints.iter().map(|c| c.cone).collect();
        assert_eq!(kinds, [ConeKind::Soc, ConeKind::Nonneg, ConeKind::Nonneg]);
        assert!(is_affine_tree(&l.objective));
        assert!(l.constraints.iter().all(|c| is_affine_tree(&c.expr)));
    }

    #[test]
    fn sum_squares_boundary_is_the_square() {
        // At x = (3, 4) the smallest t with the stacked vector in the cone is 25.
        let x = Expr::variable("x", Shape::vector(2));
        let pb = Problem::new(Sense::Minimize, x.sum_squares(), vec![]).unwrap();
        let l = lower(&pb).unwrap();
        let soc = &l.constraints[0].expr;
        let mut vars = Values::new();
        vars.insert("x".into(), Array::vector(vec![3.0, 4.0]));
        let margin = |t: f64, vars: &mut Values| {
            vars.insert("#t0".into(), Array::scalar(t));
            let v = evaluate(soc, vars, &Values::new()).unwrap();
            let d = v.data();
            d[0] - d[1..].iter().map(|a| a * a).sum::<f64>().sqrt()
        };
        assert!(margin(25.0, &mut vars).abs() < 1e-12);
        assert!(margin(24.9, &mut vars) < 0.0);
        assert!(margin(25.1, &mut vars) > 0.0);
    }

    #[test]
    fn affine_problem_is_unchanged_up_to_relations() {
        let x = Expr::variable("x", Shape::vector(2));
        let c = Constraint::le(&x.sum(), &Expr::scalar(1.0)).unwrap();
        let pb = Problem::new(Sense::Maximize, x.sum(), vec![c]).unwrap();
        let l = lower(&pb).unwrap();
        assert!(l.aux_variables.is_empty());
        assert_eq!(l.objective_sign, -1.0);
        assert_eq!(l.constraints.len(), 1);
    }

    #[test]
    fn non_dpp_is_rejected() {
        let x = Expr::variable("x", Shape::scalar());
        let p = Expr::parameter("p", Shape::scalar());
        let pb = Problem::new(Sense::Minimize, p.mul(&x.norm2()).unwrap(), vec![]).unwrap();
        assert!(matches!(lower(&pb), Err(CanonError::NotDpp(_))));
    }
}
