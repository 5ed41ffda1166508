//! Whole-problem DPP and DCP verification.

use std::fmt;

use super::analysis::{self, Info, Rules};
use super::problem::{Problem, Relation, Sense};
use super::{Classification, Curvature, Expr, Node};

/// One broken rule, located by a path such as `constraints[0].lhs.args[1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.rule)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DppReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl fmt::Display for DppReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.valid {
            return write!(f, "valid");
        }
        write!(f, "invalid ({} violation(s))", self.violations.len())?;
        for v in &self.violations {
            write!(f, "\n  {v}")?;
        }
        Ok(())
    }
}

pub fn check_dpp(problem: &Problem) -> DppReport {
    analyze(problem, Rules::Dpp)
}

/// DCP check with parameters treated as constants of known sign.
pub fn is_dcp(problem: &Problem) -> bool {
    analyze(problem, Rules::Dcp).valid
}

pub fn classify(expr: &Expr) -> Classification {
    expr.classification()
}

fn analyze(problem: &Problem, rules: Rules) -> DppReport {
    let mut violations = Vec::new();
    let obj = walk(problem.objective(), rules, "objective", &mut violations);
    let obj_ok = match problem.sense() {
        Sense::Minimize => obj.curvature.is_convex(),
        Sense::Maximize => obj.curvature.is_concave(),
    };
    if !obj_ok && obj.curvature != Curvature::Unknown {
        let (want, verb) = match problem.sense() {
            Sense::Minimize => ("convex", "minimized"),
            Sense::Maximize => ("concave", "maximized"),
        };
        violations.push(Violation {
            path: "objective".into(),
            rule: format!("a {verb} objective must be {want}, found {}", name(obj.curvature)),
        });
    }
    for (k, c) in problem.constraints().iter().enumerate() {
        let lhs_path = format!("constraints[{k}].lhs");
        let rhs_path = format!("constraints[{k}].rhs");
        let lhs = walk(c.lhs(), rules, &lhs_path, &mut violations);
        let rhs = walk(c.rhs(), rules, &rhs_path, &mut violations);
        let (lhs_ok, rhs_ok, lhs_want, rhs_want) = match c.relation() {
            Relation::Le | Relation::Ge => (
                lhs.curvature.is_convex(),
                rhs.curvature.is_concave(),
                "convex",
                "concave",
            ),
            Relation::Eq => (lhs.curvature.is_affine(), rhs.curvature.is_affine(), "affine", "affine"),
        };
        for (ok, info, path, want) in [(lhs_ok, lhs, lhs_path, lhs_want), (rhs_ok, rhs, rhs_path, rhs_want)] {
            if !ok && info.curvature != Curvature::Unknown {
                violations.push(Violation {
                    path,
                    rule: format!(
                        "{} constraint side must be {want}, found {}",
                        c.relation().symbol(),
                        name(info.curvature)
                    ),
                });
            }
        }
    }
    DppReport {
        valid: violations.is_empty(),
        violations,
    }
}

/// Re-derives annotations bottom-up, recording the node where curvature first
/// becomes unknown.
fn walk(expr: &Expr, rules: Rules, path: &str, out: &mut Vec<Violation>) -> Info {
    match expr.node() {
        Node::Leaf(leaf) => analysis::leaf_info(leaf, rules),
        Node::Apply { atom, args } => {
            let infos: Vec<Info> = args
                .iter()
                .enumerate()
                .map(|(k, a)| walk(a, rules, &format!("{path}.args[{k}]"), out))
                .collect();
            let (info, reason) = analysis::infer(atom, &infos, rules);
            if let Some(rule) = reason {
                if infos.iter().all(|i| i.curvature != Curvature::Unknown) {
                    out.push(Violation {
                        path: path.to_string(),
                        rule,
                    });
                }
            }
            info
        }
    }
}

fn name(c: Curvature) -> &'static str {
    match c {
        Curvature::Constant => "constant",
        Curvature::Affine => "affine",
        Curvature::Convex => "convex",
        Curvature::Concave => "concave",
        Curvature::Unknown => "unknown",
    }
}
