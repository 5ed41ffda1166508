//! JSON problem and values documents.
//!
//! ```json
//! {
//!   "variables":  [{"name": "x", "shape": [2], "nonneg": true}],
//!   "parameters": [{"name": "lambda", "shape": [], "nonneg": true}],
//!   "objective":  {"sense": "minimize", "expr": {"atom": "norm2", "args": [{"var": "x"}]}},
//!   "constraints": [{"lhs": {"var": "x"}, "relation": "<=", "rhs": {"const": [1, 2]}}]
//! }
//! ```
//!
//! Expression nodes are `{"var": name}`, `{"param": name}`, `{"const": value}` or
//! `{"atom": name, "args": [...]}`; `index` also takes `rows` and `cols`
//! (half-open ranges), `reshape` and `promote` take `shape`. Dense values are a
//! number, a list, or a list of rows.

use std::collections::BTreeMap;
use std::fmt;

use jsonc_parser::ast::Value as Ast;
use serde::{Deserialize, Serialize};

use crate::array::{Array, Values};
use crate::expr::{
    Atom, AtomId, Constraint, Declaration, Expr, ExprError, Leaf, LeafAttrs, Node, Problem, ProblemError, Relation,
    Sense,
};
use crate::shape::Shape;

/// Dense array literal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Dense {
    Scalar(f64),
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

impl Dense {
    pub fn from_array(a: &Array) -> Dense {
        match a.shape().rank() {
            0 => Dense::Scalar(a.data()[0]),
            1 => Dense::Vector(a.data().to_vec()),
            _ => Dense::Matrix(a.to_rows()),
        }
    }

    pub fn to_array(&self) -> Result<Array, String> {
        match self {
            Dense::Scalar(v) => Ok(Array::scalar(*v)),
            Dense::Vector(v) => Ok(Array::vector(v.clone())),
            Dense::Matrix(rows) => Array::from_rows(rows).map_err(|e| format!("ragged matrix: {e}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclDoc {
    pub name: String,
    pub shape: Shape,
    #[serde(default, skip_serializing_if = "is_false")]
    pub nonneg: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub nonpos: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl DeclDoc {
    fn attrs(&self) -> LeafAttrs {
        LeafAttrs {
            nonneg: self.nonneg,
            nonpos: self.nonpos,
        }
    }

    fn from_decl(d: &Declaration) -> DeclDoc {
        DeclDoc {
            name: d.name.clone(),
            shape: d.shape.clone(),
            nonneg: d.attrs.nonneg,
            nonpos: d.attrs.nonpos,
        }
    }

    fn to_decl(&self) -> Declaration {
        Declaration {
            name: self.name.clone(),
            shape: self.shape.clone(),
            attrs: self.attrs(),
        }
    }
}

/// One expression node. Exactly one of `var`, `param`, `const`, `atom` is set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExprDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<String>,
    #[serde(rename = "const", default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<Dense>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atom: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<ExprDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<Shape>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SenseDoc {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveDoc {
    pub sense: SenseDoc,
    pub expr: ExprDoc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelationDoc {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintDoc {
    pub lhs: ExprDoc,
    pub relation: RelationDoc,
    pub rhs: ExprDoc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    #[serde(default)]
    pub variables: Vec<DeclDoc>,
    #[serde(default)]
    pub parameters: Vec<DeclDoc>,
    pub objective: ObjectiveDoc,
    #[serde(default)]
    pub constraints: Vec<ConstraintDoc>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Seg {
    Key(&'static str),
    Index(usize),
}

/// Location of a node inside a document, e.g. `constraints[0].lhs.args[1]`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DocPath(pub Vec<Seg>);

impl DocPath {
    fn key(&self, k: &'static str) -> DocPath {
        let mut p = self.0.clone();
        p.push(Seg::Key(k));
        DocPath(p)
    }

    fn index(&self, i: usize) -> DocPath {
        let mut p = self.0.clone();
        p.push(Seg::Index(i));
        DocPath(p)
    }
}

impl fmt::Display for DocPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, s) in self.0.iter().enumerate() {
            match s {
                Seg::Key(key) if k == 0 => write!(f, "{key}")?,
                Seg::Key(key) => write!(f, ".{key}")?,
                Seg::Index(i) => write!(f, "[{i}]")?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("{0}")]
    Syntax(String),
    #[error("unknown atom `{0}`")]
    UnknownAtom(String),
    #[error("undeclared {kind} `{name}`")]
    Undeclared { kind: &'static str, name: String },
    #[error("malformed node: {0}")]
    Malformed(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Semantic error located by document path.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("at {path}: {kind}")]
pub struct DocError {
    pub path: DocPath,
    /// The offending token, when there is one.
    pub token: Option<String>,
    pub kind: ParseErrorKind,
}

/// Error with a 1-based text position.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    /// Document path of the offending node; empty for syntax errors.
    pub path: String,
    pub token: Option<String>,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)?;
        if !self.path.is_empty() {
            write!(f, " ({})", self.path)?;
        }
        write!(f, ": {}", self.kind)?;
        if let Some(t) = &self.token {
            write!(f, " [token `{t}`]")?;
        }
        Ok(())
    }
}

impl ParseError {
    fn syntax(e: serde_json::Error) -> ParseError {
        ParseError {
            line: e.line(),
            column: e.column(),
            path: String::new(),
            token: None,
            kind: ParseErrorKind::Syntax(e.to_string()),
        }
    }

    fn locate(text: &str, e: DocError) -> ParseError {
        let offset = locate_path(text, &e.path).unwrap_or(0);
        let (line, column) = line_column(text, offset);
        ParseError {
            line,
            column,
            path: e.path.to_string(),
            token: e.token,
            kind: e.kind,
        }
    }
}

fn locate_path(text: &str, path: &DocPath) -> Option<usize> {
    let ast = jsonc_parser::parse_to_ast(text, &Default::default(), &Default::default()).ok()?;
    let mut node = ast.value?;
    let mut start = 0;
    for seg in &path.0 {
        node = match (seg, node) {
            (Seg::Key(k), Ast::Object(obj)) => obj.properties.into_iter().find(|p| p.name.as_str() == *k)?.value,
            (Seg::Index(i), Ast::Array(arr)) => arr.elements.into_iter().nth(*i)?,
            _ => break,
        };
        start = jsonc_parser::common::Ranged::range(&node).start;
    }
    Some(start)
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

struct Scope<'a> {
    variables: BTreeMap<&'a str, &'a DeclDoc>,
    parameters: BTreeMap<&'a str, &'a DeclDoc>,
}

fn err(path: &DocPath, token: Option<&str>, kind: ParseErrorKind) -> DocError {
    DocError {
        path: path.clone(),
        token: token.map(str::to_string),
        kind,
    }
}

impl ExprDoc {
    fn to_expr(&self, scope: &Scope<'_>, path: &DocPath) -> Result<Expr, DocError> {
        let set = [
            self.var.is_some(),
            self.param.is_some(),
            self.constant.is_some(),
            self.atom.is_some(),
        ];
        if set.iter().filter(|b| **b).count() != 1 {
            return Err(err(
                path,
                None,
                ParseErrorKind::Malformed("exactly one of `var`, `param`, `const`, `atom` must be given".into()),
            ));
        }
        let Some(atom_name) = &self.atom else {
            if !self.args.is_empty() || self.rows.is_some() || self.cols.is_some() || self.shape.is_some() {
                return Err(err(
                    path,
                    None,
                    ParseErrorKind::Malformed("leaves take no `args`, `rows`, `cols` or `shape`".into()),
                ));
            }
            return self.leaf(scope, path);
        };
        let id = AtomId::from_name(atom_name).ok_or_else(|| {
            err(
                &path.key("atom"),
                Some(atom_name),
                ParseErrorKind::UnknownAtom(atom_name.clone()),
            )
        })?;
        let wants_range = id == AtomId::Index;
        let wants_shape = matches!(id, AtomId::Reshape | AtomId::Promote);
        let malformed = |what: &str| err(path, Some(atom_name), ParseErrorKind::Malformed(what.into()));
        if wants_range != (self.rows.is_some() && self.cols.is_some())
            || (!wants_range && (self.rows.is_some() || self.cols.is_some()))
        {
            return Err(malformed(
                "`rows` and `cols` are required for `index` and only allowed there",
            ));
        }
        if wants_shape != self.shape.is_some() {
            return Err(malformed(
                "`shape` is required for `reshape` and `promote` and only allowed there",
            ));
        }
        let atom = match id {
            AtomId::Add => Atom::Add,
            AtomId::Neg => Atom::Neg,
            AtomId::MatMul => Atom::MatMul,
            AtomId::MulElem => Atom::MulElem,
            AtomId::Sum => Atom::Sum,
            AtomId::Index => {
                let (r, c) = (self.rows.expect("checked"), self.cols.expect("checked"));
                Atom::Index {
                    rows: (r[0], r[1]),
                    cols: (c[0], c[1]),
                }
            }
            AtomId::Reshape => Atom::Reshape(self.shape.clone().expect("checked")),
            AtomId::Transpose => Atom::Transpose,
            AtomId::VStack => Atom::VStack,
            AtomId::HStack => Atom::HStack,
            AtomId::Promote => Atom::Promote(self.shape.clone().expect("checked")),
            AtomId::Norm2 => Atom::Norm2,
            AtomId::SumSquares => Atom::SumSquares,
            AtomId::Abs => Atom::Abs,
            AtomId::Maximum => Atom::Maximum,
        };
        let args_path = path.key("args");
        let args = self
            .args
            .iter()
            .enumerate()
            .map(|(i, a)| a.to_expr(scope, &args_path.index(i)))
            .collect::<Result<Vec<_>, _>>()?;
        Expr::make_node(atom, args).map_err(|e| err(path, Some(atom_name), e.into()))
    }

    fn leaf(&self, scope: &Scope<'_>, path: &DocPath) -> Result<Expr, DocError> {
        let leaf = if let Some(name) = &self.var {
            let d = scope.variables.get(name.as_str()).ok_or_else(|| {
                err(
                    &path.key("var"),
                    Some(name),
                    ParseErrorKind::Undeclared {
                        kind: "variable",
                        name: name.clone(),
                    },
                )
            })?;
            Leaf::Variable {
                name: name.clone(),
                shape: d.shape.clone(),
                attrs: d.attrs(),
            }
        } else if let Some(name) = &self.param {
            let d = scope.parameters.get(name.as_str()).ok_or_else(|| {
                err(
                    &path.key("param"),
                    Some(name),
                    ParseErrorKind::Undeclared {
                        kind: "parameter",
                        name: name.clone(),
                    },
                )
            })?;
            Leaf::Parameter {
                name: name.clone(),
                shape: d.shape.clone(),
                attrs: d.attrs(),
            }
        } else {
            let dense = self.constant.as_ref().expect("checked by caller");
            let value = dense
                .to_array()
                .map_err(|m| err(&path.key("const"), None, ParseErrorKind::Malformed(m)))?;
            Leaf::Constant(value)
        };
        Expr::leaf(leaf).map_err(|e| err(path, None, e.into()))
    }

    pub fn from_expr(e: &Expr) -> ExprDoc {
        match e.node() {
            Node::Leaf(Leaf::Variable { name, .. }) => ExprDoc {
                var: Some(name.clone()),
                ..Default::default()
            },
            Node::Leaf(Leaf::Parameter { name, .. }) => ExprDoc {
                param: Some(name.clone()),
                ..Default::default()
            },
            Node::Leaf(Leaf::Constant(a)) => ExprDoc {
                constant: Some(Dense::from_array(a)),
                ..Default::default()
            },
            Node::Apply { atom, args } => {
                let mut doc = ExprDoc {
                    atom: Some(atom.id().name().to_string()),
                    args: args.iter().map(ExprDoc::from_expr).collect(),
                    ..Default::default()
                };
                match atom {
                    Atom::Index { rows, cols } => {
                        doc.rows = Some([rows.0, rows.1]);
                        doc.cols = Some([cols.0, cols.1]);
                    }
                    Atom::Reshape(s) | Atom::Promote(s) => doc.shape = Some(s.clone()),
                    _ => {}
                }
                doc
            }
        }
    }
}

impl ProblemDocument {
    pub fn from_problem(p: &Problem) -> ProblemDocument {
        ProblemDocument {
            variables: p.variables().iter().map(DeclDoc::from_decl).collect(),
            parameters: p.parameters().iter().map(DeclDoc::from_decl).collect(),
            objective: ObjectiveDoc {
                sense: match p.sense() {
                    Sense::Minimize => SenseDoc::Minimize,
                    Sense::Maximize => SenseDoc::Maximize,
                },
                expr: ExprDoc::from_expr(p.objective()),
            },
            constraints: p
                .constraints()
                .iter()
                .map(|c| ConstraintDoc {
                    lhs: ExprDoc::from_expr(c.lhs()),
                    relation: match c.relation() {
                        Relation::Le => RelationDoc::Le,
                        Relation::Eq => RelationDoc::Eq,
                        Relation::Ge => RelationDoc::Ge,
                    },
                    rhs: ExprDoc::from_expr(c.rhs()),
                })
                .collect(),
        }
    }

    pub fn to_problem(&self) -> Result<Problem, DocError> {
        let root = DocPath::default();
        let mut seen = std::collections::HashSet::new();
        if let Some(d) = self
            .variables
            .iter()
            .chain(&self.parameters)
            .find(|d| !seen.insert(d.name.as_str()))
        {
            return Err(self.locate_problem_error(ProblemError::Duplicate(d.name.clone())));
        }
        let scope = Scope {
            variables: self.variables.iter().map(|d| (d.name.as_str(), d)).collect(),
            parameters: self.parameters.iter().map(|d| (d.name.as_str(), d)).collect(),
        };
        let obj_path = root.key("objective").key("expr");
        let objective = self.objective.expr.to_expr(&scope, &obj_path)?;
        let mut constraints = Vec::with_capacity(self.constraints.len());
        for (i, c) in self.constraints.iter().enumerate() {
            let p = root.key("constraints").index(i);
            let lhs = c.lhs.to_expr(&scope, &p.key("lhs"))?;
            let rhs = c.rhs.to_expr(&scope, &p.key("rhs"))?;
            let relation = match c.relation {
                RelationDoc::Le => Relation::Le,
                RelationDoc::Eq => Relation::Eq,
                RelationDoc::Ge => Relation::Ge,
            };
            constraints.push(Constraint::new(&lhs, relation, &rhs).map_err(|e| err(&p, None, e.into()))?);
        }
        let sense = match self.objective.sense {
            SenseDoc::Minimize => Sense::Minimize,
            SenseDoc::Maximize => Sense::Maximize,
        };
        let variables = self.variables.iter().map(DeclDoc::to_decl).collect();
        let parameters = self.parameters.iter().map(DeclDoc::to_decl).collect();
        Problem::with_declarations(sense, objective, constraints, variables, parameters)
            .map_err(|e| self.locate_problem_error(e))
    }

    fn locate_problem_error(&self, e: ProblemError) -> DocError {
        let root = DocPath::default();
        let declared: Vec<(DocPath, &str)> = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, d)| (root.key("variables").index(i), d.name.as_str()))
            .chain(
                self.parameters
                    .iter()
                    .enumerate()
                    .map(|(i, d)| (root.key("parameters").index(i), d.name.as_str())),
            )
            .collect();
        // The n-th declaration of `name`; duplicates point at the second one.
        let decl = |name: &str, nth: usize| {
            let path = declared
                .iter()
                .filter(|(_, n)| *n == name)
                .nth(nth)
                .map_or_else(DocPath::default, |(p, _)| p.key("name"));
            (path, Some(name.to_string()))
        };
        let (path, token) = match &e {
            ProblemError::Duplicate(n) => decl(n, 1),
            ProblemError::Reserved(n) | ProblemError::Unused(n) => decl(n, 0),
            ProblemError::Undeclared { name, .. } | ProblemError::Conflict { name, .. } => decl(name, 0),
            ProblemError::NonScalarObjective(_) => (root.key("objective").key("expr"), None),
            ProblemError::Expr(_) => (root, None),
        };
        DocError {
            path,
            token,
            kind: e.into(),
        }
    }
}

/// Parses and validates a problem document.
pub fn parse_problem(text: &str) -> Result<Problem, ParseError> {
    let doc: ProblemDocument = serde_json::from_str(text).map_err(ParseError::syntax)?;
    doc.to_problem().map_err(|e| ParseError::locate(text, e))
}

/// Pretty-printed document; `parse_problem(&print_problem(p)) == p`.
pub fn print_problem(p: &Problem) -> String {
    serde_json::to_string_pretty(&ProblemDocument::from_problem(p)).expect("documents serialize")
}

/// Parses `{"name": value, ...}` with dense values as in problem documents.
pub fn parse_values(text: &str) -> Result<Values, ParseError> {
    let docs: BTreeMap<String, Dense> = serde_json::from_str(text).map_err(ParseError::syntax)?;
    docs.into_iter()
        .map(|(k, d)| match d.to_array() {
            Ok(a) => Ok((k, a)),
            Err(m) => {
                let (line, column) = text.find(&format!("\"{k}\"")).map_or((1, 1), |o| line_column(text, o));
                Err(ParseError {
                    line,
                    column,
                    path: k.clone(),
                    token: Some(k),
                    kind: ParseErrorKind::Malformed(m),
                })
            }
        })
        .collect()
}

pub fn print_values(values: &Values) -> String {
    let docs: BTreeMap<&str, Dense> = values.iter().map(|(k, v)| (k.as_str(), Dense::from_array(v))).collect();
    serde_json::to_string_pretty(&docs).expect("values serialize")
}
