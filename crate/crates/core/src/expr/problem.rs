use std::collections::{BTreeMap, HashSet};

use crate::array::{Array, Values};
use crate::shape::Shape;

use super::{Expr, ExprError, Leaf, LeafAttrs};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "==",
            Relation::Ge => ">=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Relation> {
        match s {
            "<=" => Some(Relation::Le),
            "==" => Some(Relation::Eq),
            ">=" => Some(Relation::Ge),
            _ => None,
        }
    }
}

/// `lhs relation rhs`. A `>=` constraint is stored as `rhs <= lhs`, so
/// [`Constraint::relation`] is never [`Relation::Ge`].
#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    lhs: Expr,
    relation: Relation,
    rhs: Expr,
}

impl Constraint {
    /// Scalar sides are promoted to the shape of the other side.
    pub fn new(lhs: &Expr, relation: Relation, rhs: &Expr) -> Result<Constraint, ExprError> {
        let (lhs, rhs) = match (lhs.shape().is_scalar(), rhs.shape().is_scalar()) {
            (true, false) => (lhs.broadcast_to(rhs.shape())?, rhs.clone()),
            (false, true) => (lhs.clone(), rhs.broadcast_to(lhs.shape())?),
            _ => (lhs.clone(), rhs.clone()),
        };
        if lhs.shape() != rhs.shape() {
            return Err(ExprError::Shape {
                atom: super::AtomId::Add,
                shapes: vec![lhs.shape().clone(), rhs.shape().clone()],
                reason: format!("constraint sides differ in shape ({})", relation.symbol()),
            });
        }
        Ok(match relation {
            Relation::Ge => Constraint {
                lhs: rhs,
                relation: Relation::Le,
                rhs: lhs,
            },
            _ => Constraint { lhs, relation, rhs },
        })
    }

    pub fn le(lhs: &Expr, rhs: &Expr) -> Result<Constraint, ExprError> {
        Self::new(lhs, Relation::Le, rhs)
    }

    pub fn eq(lhs: &Expr, rhs: &Expr) -> Result<Constraint, ExprError> {
        Self::new(lhs, Relation::Eq, rhs)
    }

    pub fn ge(lhs: &Expr, rhs: &Expr) -> Result<Constraint, ExprError> {
        Self::new(lhs, Relation::Ge, rhs)
    }

    pub fn lhs(&self) -> &Expr {
        &self.lhs
    }

    pub fn rhs(&self) -> &Expr {
        &self.rhs
    }

    pub fn relation(&self) -> Relation {
        self.relation
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Declaration {
    pub name: String,
    pub shape: Shape,
    pub attrs: LeafAttrs,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProblemError {
    #[error("objective must be scalar, found shape {0}")]
    NonScalarObjective(Shape),
    #[error("undeclared {kind} `{name}`")]
    Undeclared { kind: &'static str, name: String },
    #[error("`{0}` is declared more than once")]
    Duplicate(String),
    #[error("{kind} `{name}` is used with shape or attributes that differ from its declaration")]
    Conflict { kind: &'static str, name: String },
    #[error("name `{0}` is reserved (the `#` prefix is used for auxiliary variables)")]
    Reserved(String),
    #[error("`{0}` is declared but not used")]
    Unused(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    sense: Sense,
    objective: Expr,
    constraints: Vec<Constraint>,
    variables: Vec<Declaration>,
    parameters: Vec<Declaration>,
}

impl Problem {
    /// Declarations are collected from the leaves in order of first appearance.
    pub fn new(sense: Sense, objective: Expr, constraints: Vec<Constraint>) -> Result<Problem, ProblemError> {
        let mut variables = Vec::new();
        let mut parameters = Vec::new();
        let mut seen = HashSet::new();
        for leaf in all_leaves(&objective, &constraints) {
            let (list, name, shape, attrs) = match leaf {
                Leaf::Variable { name, shape, attrs } => (&mut variables, name, shape, attrs),
                Leaf::Parameter { name, shape, attrs } => (&mut parameters, name, shape, attrs),
                Leaf::Constant(_) => continue,
            };
            if seen.insert(name.clone()) {
                list.push(Declaration {
                    name: name.clone(),
                    shape: shape.clone(),
                    attrs: *attrs,
                });
            }
        }
        Self::with_declarations(sense, objective, constraints, variables, parameters)
    }

    /// Uses explicit declaration lists, which fix the variable and parameter order.
    /// Declared but unused variables are allowed; unused parameters are not, since
    /// they could never receive a gradient.
    pub fn with_declarations(
        sense: Sense,
        objective: Expr,
        constraints: Vec<Constraint>,
        variables: Vec<Declaration>,
        parameters: Vec<Declaration>,
    ) -> Result<Problem, ProblemError> {
        if !objective.shape().is_scalar() {
            return Err(ProblemError::NonScalarObjective(objective.shape().clone()));
        }
        let mut names = HashSet::new();
        for d in variables.iter().chain(&parameters) {
            if d.name.starts_with('#') {
                return Err(ProblemError::Reserved(d.name.clone()));
            }
            if !names.insert(d.name.as_str()) {
                return Err(ProblemError::Duplicate(d.name.clone()));
            }
        }
        let vars: BTreeMap<&str, &Declaration> = variables.iter().map(|d| (d.name.as_str(), d)).collect();
        let params: BTreeMap<&str, &Declaration> = parameters.iter().map(|d| (d.name.as_str(), d)).collect();
        let mut used = HashSet::new();
        for leaf in all_leaves(&objective, &constraints) {
            let (kind, table, name, shape, attrs) = match leaf {
                Leaf::Variable { name, shape, attrs } => ("variable", &vars, name, shape, attrs),
                Leaf::Parameter { name, shape, attrs } => ("parameter", &params, name, shape, attrs),
                Leaf::Constant(_) => continue,
            };
            let decl = table.get(name.as_str()).ok_or_else(|| ProblemError::Undeclared {
                kind,
                name: name.clone(),
            })?;
            if &decl.shape != shape || &decl.attrs != attrs {
                return Err(ProblemError::Conflict {
                    kind,
                    name: name.clone(),
                });
            }
            used.insert(name.clone());
        }
        if let Some(p) = parameters.iter().find(|p| !used.contains(&p.name)) {
            return Err(ProblemError::Unused(p.name.clone()));
        }
        Ok(Problem {
            sense,
            objective,
            constraints,
            variables,
            parameters,
        })
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    pub fn objective(&self) -> &Expr {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn variables(&self) -> &[Declaration] {
        &self.variables
    }

    pub fn parameters(&self) -> &[Declaration] {
        &self.parameters
    }

    /// Replaces every parameter with a constant holding its value. The result has
    /// no parameters and the same variable order.
    pub fn substitute_parameters(&self, values: &Values) -> Result<Problem, ProblemError> {
        for p in &self.parameters {
            let v = values.get(&p.name).ok_or_else(|| ProblemError::Undeclared {
                kind: "parameter value",
                name: p.name.clone(),
            })?;
            if v.shape() != &p.shape {
                return Err(ProblemError::Conflict {
                    kind: "parameter value",
                    name: p.name.clone(),
                });
            }
        }
        let sub = |leaf: &Leaf| match leaf {
            Leaf::Parameter { name, .. } => Some(Expr::constant(values[name].clone())),
            _ => None,
        };
        let objective = self.objective.map_leaves(&sub)?;
        let constraints = self
            .constraints
            .iter()
            .map(|c| {
                Ok(Constraint {
                    lhs: c.lhs.map_leaves(&sub)?,
                    relation: c.relation,
                    rhs: c.rhs.map_leaves(&sub)?,
                })
            })
            .collect::<Result<Vec<_>, ExprError>>()?;
        Ok(Problem {
            sense: self.sense,
            objective,
            constraints,
            variables: self.variables.clone(),
            parameters: Vec::new(),
        })
    }

    /// Zero-valued arrays for every parameter.
    pub fn zero_parameters(&self) -> Values {
        self.parameters
            .iter()
            .map(|p| (p.name.clone(), Array::zeros(p.shape.clone())))
            .collect()
    }
}

fn all_leaves<'a>(objective: &'a Expr, constraints: &'a [Constraint]) -> Vec<&'a Leaf> {
    let mut out = objective.leaves();
    for c in constraints {
        out.extend(c.lhs.leaves());
        out.extend(c.rhs.leaves());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn declarations_in_first_appearance_order() {
        let x = Expr::variable("x", Shape::vector(2));
        let y = Expr::variable("y", Shape::vector(2));
        let p = Expr::parameter("p", Shape::vector(2));
        let obj = y.sub(&p).unwrap().norm2().add(&x.sum()).unwrap();
        let pb = Problem::new(Sense::Minimize, obj, vec![]).unwrap();
        let names: Vec<_> = pb.variables().iter().map(|d| d.name.as_str()).collect();
        assert_eq!(names, ["y", "x"]);
    }

    #[test]
    fn ge_is_stored_as_le() {
        let x = Expr::variable("x", Shape::vector(2));
        let c = Constraint::ge(&x, &Expr::scalar(1.0)).unwrap();
        assert_eq!(c.relation(), Relation::Le);
        assert_eq!(c.rhs(), &x);
        assert_eq!(c.lhs().shape(), &Shape::vector(2));
    }

    #[test]
    fn validation_errors() {
        let x = Expr::variable("x", Shape::vector(2));
        assert!(matches!(
            Problem::new(Sense::Minimize, x.clone(), vec![]),
            Err(ProblemError::NonScalarObjective(_))
        ));
        let x3 = Expr::variable("x", Shape::vector(3));
        assert!(matches!(
            Problem::new(Sense::Minimize, x.sum().add(&x3.sum()).unwrap(), vec![]),
            Err(ProblemError::Conflict { .. })
        ));
        let hidden = Expr::variable("#t0", Shape::scalar());
        assert!(matches!(
            Problem::new(Sense::Minimize, hidden, vec![]),
            Err(ProblemError::Reserved(_))
        ));
        let p = Expr::parameter("p", Shape::scalar());
        let decl = |n: &str| Declaration {
            name: n.into(),
            shape: Shape::vector(2),
            attrs: LeafAttrs::NONE,
        };
        assert!(matches!(
            Problem::with_declarations(
                Sense::Minimize,
                x.sum().add(&p).unwrap(),
                vec![],
                vec![decl("x")],
                vec![]
            ),
            Err(ProblemError::Undeclared { kind: "parameter", .. })
        ));
    }

    #[test]
    fn substitution_removes_parameters() {
        let x = Expr::variable("x", Shape::vector(2));
        let p = Expr::parameter("p", Shape::vector(2));
        let pb = Problem::new(Sense::Minimize, x.sub(&p).unwrap().sum_squares(), vec![]).unwrap();
        let mut vals = Values::new();
        vals.insert("p".into(), Array::vector(vec![1.0, 2.0]));
        let sub = pb.substitute_parameters(&vals).unwrap();
        assert!(sub.parameters().is_empty());
        assert!(sub
            .objective()
            .leaves()
            .iter()
            .all(|l| !matches!(l, Leaf::Parameter { .. })));
    }
}
