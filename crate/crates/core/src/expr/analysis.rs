//! Curvature, sign and parameter classification rules.
//!
//! Two rule sets share this code. Under [`Rules::Dpp`] parameters are affine and
//! products must satisfy the parametrized product rule; under [`Rules::Dcp`]
//! parameters are plain constants.

use super::atom::{Atom, AtomId};
use super::{Classification, Curvature, Leaf, Sign};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Rules {
    Dpp,
    Dcp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Info {
    pub curvature: Curvature,
    pub sign: Sign,
    pub class: Classification,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Monotonicity {
    Increasing,
    Decreasing,
    None,
}

pub(crate) fn leaf_sign(leaf: &Leaf) -> Sign {
    match leaf {
        Leaf::Variable { attrs, .. } | Leaf::Parameter { attrs, .. } => match (attrs.nonneg, attrs.nonpos) {
            (true, true) => Sign::Zero,
            (true, false) => Sign::Nonneg,
            (false, true) => Sign::Nonpos,
            (false, false) => Sign::Unknown,
        },
        Leaf::Constant(a) => {
            let d = a.data();
            let nonneg = d.iter().all(|v| *v >= 0.0);
            let nonpos = d.iter().all(|v| *v <= 0.0);
            match (nonneg, nonpos) {
                (true, true) => Sign::Zero,
                (true, false) => Sign::Nonneg,
                (false, true) => Sign::Nonpos,
                (false, false) => Sign::Unknown,
            }
        }
    }
}

pub(crate) fn leaf_info(leaf: &Leaf, rules: Rules) -> Info {
    let (curvature, class) = match leaf {
        Leaf::Variable { .. } => (
            Curvature::Affine,
            Classification {
                parameter_free: true,
                variable_free: false,
                parameter_affine: false,
            },
        ),
        Leaf::Parameter { .. } => (
            if rules == Rules::Dpp {
                Curvature::Affine
            } else {
                Curvature::Constant
            },
            Classification {
                parameter_free: false,
                variable_free: true,
                parameter_affine: true,
            },
        ),
        Leaf::Constant(_) => (
            Curvature::Constant,
            Classification {
                parameter_free: true,
                variable_free: true,
                parameter_affine: true,
            },
        ),
    };
    Info {
        curvature,
        sign: leaf_sign(leaf),
        class,
    }
}

fn is_constant(info: &Info, rules: Rules) -> bool {
    match rules {
        Rules::Dpp => info.class.parameter_free && info.class.variable_free,
        Rules::Dcp => info.class.variable_free,
    }
}

fn sign_mul(a: Sign, b: Sign) -> Sign {
    use Sign::*;
    match (a, b) {
        (Zero, _) | (_, Zero) => Zero,
        (Nonneg, Nonneg) | (Nonpos, Nonpos) => Nonneg,
        (Nonneg, Nonpos) | (Nonpos, Nonneg) => Nonpos,
        _ => Unknown,
    }
}

fn sign_add(a: Sign, b: Sign) -> Sign {
    use Sign::*;
    match (a, b) {
        (Zero, s) | (s, Zero) => s,
        (Nonneg, Nonneg) => Nonneg,
        (Nonpos, Nonpos) => Nonpos,
        _ => Unknown,
    }
}

fn sign_neg(a: Sign) -> Sign {
    match a {
        Sign::Nonneg => Sign::Nonpos,
        Sign::Nonpos => Sign::Nonneg,
        s => s,
    }
}

pub(crate) fn infer_sign(atom: &Atom, args: &[Info]) -> Sign {
    let signs = || args.iter().map(|a| a.sign);
    match atom.id() {
        AtomId::Neg => sign_neg(args[0].sign),
        AtomId::Add | AtomId::VStack | AtomId::HStack => {
            // Stacks keep a sign only if every block shares it; `sign_add` is that join.
            signs().reduce(sign_add).unwrap_or(Sign::Zero)
        }
        AtomId::MatMul | AtomId::MulElem => sign_mul(args[0].sign, args[1].sign),
        AtomId::Sum | AtomId::Index | AtomId::Reshape | AtomId::Transpose | AtomId::Promote => args[0].sign,
        AtomId::Norm2 | AtomId::SumSquares | AtomId::Abs => {
            if args[0].sign == Sign::Zero {
                Sign::Zero
            } else {
                Sign::Nonneg
            }
        }
        AtomId::Maximum => match (args[0].sign, args[1].sign) {
            (Sign::Zero, Sign::Zero) | (Sign::Zero, Sign::Nonpos) | (Sign::Nonpos, Sign::Zero) => Sign::Zero,
            (Sign::Nonneg, _) | (_, Sign::Nonneg) | (Sign::Zero, _) | (_, Sign::Zero) => Sign::Nonneg,
            (Sign::Nonpos, Sign::Nonpos) => Sign::Nonpos,
            _ => Sign::Unknown,
        },
    }
}

fn sign_monotonicity(sign: Sign) -> Monotonicity {
    match sign {
        Sign::Zero | Sign::Nonneg => Monotonicity::Increasing,
        Sign::Nonpos => Monotonicity::Decreasing,
        Sign::Unknown => Monotonicity::None,
    }
}

fn describe(c: Curvature) -> &'static str {
    match c {
        Curvature::Constant => "constant",
        Curvature::Affine => "affine",
        Curvature::Convex => "convex",
        Curvature::Concave => "concave",
        Curvature::Unknown => "unknown",
    }
}

/// Composition rule for an atom with the given own curvature (affine or convex).
fn compose(atom: &Atom, atom_convex: bool, args: &[(Info, Monotonicity)]) -> Result<Curvature, String> {
    if args.iter().all(|(a, _)| a.curvature == Curvature::Constant) {
        return Ok(Curvature::Constant);
    }
    let mut convex = true;
    let mut concave = !atom_convex;
    let mut offender = None;
    for (k, (a, mono)) in args.iter().enumerate() {
        let c = a.curvature;
        let ok_convex = c.is_affine()
            || (*mono == Monotonicity::Increasing && c == Curvature::Convex)
            || (*mono == Monotonicity::Decreasing && c == Curvature::Concave);
        let ok_concave = c.is_affine()
            || (*mono == Monotonicity::Increasing && c == Curvature::Concave)
            || (*mono == Monotonicity::Decreasing && c == Curvature::Convex);
        if !ok_convex && offender.is_none() {
            offender = Some((k, c, *mono));
        }
        convex &= ok_convex;
        concave &= ok_concave;
    }
    match (convex, concave) {
        (true, true) => Ok(Curvature::Affine),
        (true, false) => Ok(Curvature::Convex),
        (false, true) => Ok(Curvature::Concave),
        (false, false) => {
            let (k, c, mono) = offender.unwrap_or((0, Curvature::Unknown, Monotonicity::None));
            if c == Curvature::Unknown {
                return Err(format!("argument {k} of {atom} has unknown curvature"));
            }
            let mono = match mono {
                Monotonicity::Increasing => "nondecreasing",
                Monotonicity::Decreasing => "nonincreasing",
                Monotonicity::None => "not monotone",
            };
            Err(format!(
                "composition rule: {atom} is {} and {mono} in argument {k}, which is {}",
                if atom_convex { "convex" } else { "affine" },
                describe(c)
            ))
        }
    }
}

/// Curvature of `atom(args)`, or the violated rule when it is unknown.
pub(crate) fn infer_curvature(atom: &Atom, args: &[Info], rules: Rules) -> Result<Curvature, String> {
    let id = atom.id();
    if args.iter().any(|a| a.curvature == Curvature::Unknown) {
        let k = args.iter().position(|a| a.curvature == Curvature::Unknown).unwrap();
        return Err(format!("argument {k} of {atom} has unknown curvature"));
    }
    if id.is_product() {
        let (a, b) = (&args[0], &args[1]);
        if is_constant(a, rules) && is_constant(b, rules) {
            return Ok(Curvature::Constant);
        }
        let Some(k) = product_coefficient(args, rules) else {
            let both_param = !a.class.parameter_free && !b.class.parameter_free;
            return Err(if rules == Rules::Dpp && both_param {
                format!("product rule: both arguments of {atom} are parametrized")
            } else {
                format!(
                    "product rule: {atom} needs one constant argument, or one parameter-affine and one parameter-free argument"
                )
            });
        };
        let (coef, other) = (&args[k], &args[1 - k]);
        return compose(
            atom,
            false,
            &[
                (*coef, Monotonicity::Increasing),
                (*other, sign_monotonicity(coef.sign)),
            ],
        );
    }
    let monos: Vec<Monotonicity> = match id {
        AtomId::Neg => vec![Monotonicity::Decreasing],
        AtomId::Norm2 | AtomId::SumSquares | AtomId::Abs => vec![sign_monotonicity(args[0].sign)],
        _ => vec![Monotonicity::Increasing; args.len()],
    };
    let paired: Vec<_> = args.iter().copied().zip(monos).collect();
    compose(atom, !id.is_affine(), &paired)
}

/// Index of the argument acting as the coefficient of a product atom, if the
/// product is admissible. A constant argument is preferred.
pub(crate) fn product_coefficient(args: &[Info], rules: Rules) -> Option<usize> {
    let (a, b) = (&args[0], &args[1]);
    if is_constant(a, rules) {
        Some(0)
    } else if is_constant(b, rules) {
        Some(1)
    } else if rules == Rules::Dpp && a.class.parameter_affine && b.class.parameter_free {
        Some(0)
    } else if rules == Rules::Dpp && b.class.parameter_affine && a.class.parameter_free {
        Some(1)
    } else {
        None
    }
}

pub(crate) fn classify(args: &[Info], curvature: Curvature) -> Classification {
    let parameter_free = args.iter().all(|a| a.class.parameter_free);
    let variable_free = args.iter().all(|a| a.class.variable_free);
    Classification {
        parameter_free,
        variable_free,
        parameter_affine: variable_free && curvature.is_affine(),
    }
}

pub(crate) fn infer(atom: &Atom, args: &[Info], rules: Rules) -> (Info, Option<String>) {
    let (curvature, reason) = match infer_curvature(atom, args, rules) {
        Ok(c) => (c, None),
        Err(r) => (Curvature::Unknown, Some(r)),
    };
    let info = Info {
        curvature,
        sign: infer_sign(atom, args),
        class: classify(args, curvature),
    };
    (info, reason)
}
