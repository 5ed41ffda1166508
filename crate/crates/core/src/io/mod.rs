//! Problem and values documents, and file formats for cone-program data.

mod document;
mod formats;

pub use document::{
    parse_problem, parse_values, print_problem, print_values, ConstraintDoc, DeclDoc, Dense, DocError, DocPath,
    ExprDoc, ObjectiveDoc, ParseError, ParseErrorKind, ProblemDocument, RelationDoc, Seg, SenseDoc,
};
pub use formats::{
    read_cone_program, read_cones, read_matrix_market, read_vector, write_cones, write_matrix_market, write_vector,
    FormatError,
};
