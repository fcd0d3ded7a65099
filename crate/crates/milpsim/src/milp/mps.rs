//! Reader and writer for a fixed MPS subset.
//!
//! Supported layout, in order:
//!
//! ```text
//! NAME <token>
//! ROWS
//!  N <objective row>          exactly one
//!  G|L|E <row name>           any number
//! COLUMNS
//!     MARKER 'MARKER' 'INTORG'     toggles integer kind on
//!     <var> <row> <value> [<row> <value>]
//!     MARKER 'MARKER' 'INTEND'     toggles integer kind off
//! RHS
//!     <set> <row> <value> [<row> <value>]
//! BOUNDS
//!  LO|UP|FX <set> <var> <value>
//!  FR|BV <set> <var>
//! ENDATA
//! ```
//!
//! Conventions: the objective is minimized; lines starting with `*` are
//! comments; header lines start at column zero, data lines are indented;
//! numeric fields accept the literal tokens `+inf` / `-inf`; a variable's
//! COLUMNS entries must be contiguous. Default bounds are `[0, +inf)`,
//! except variables declared inside INTORG/INTEND markers that no BOUNDS
//! line mentions, which default to `[0, 1]`. `BV` declares a binary
//! variable with bounds `[0, 1]`; later LO/UP/FX lines may tighten it.
//! RANGES and free-format extensions are not supported.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::instance::{InstanceError, MilpInstance, Sense, VarKind};

#[derive(Debug, Error, PartialEq)]
pub enum MpsError {
    #[error("UnknownSection (line {line}): unexpected header `{token}`")]
    UnknownSection { line: usize, token: String },
    #[error("DuplicateRow (line {line}): row `{name}` already declared")]
    DuplicateRow { line: usize, name: String },
    #[error("UnknownRowInColumns (line {line}): row `{row}` was never declared")]
    UnknownRowInColumns { line: usize, row: String },
    #[error("MalformedNumeric (line {line}): cannot parse `{token}`")]
    MalformedNumeric { line: usize, token: String },
    #[error("MissingSection: expected `{0}` section")]
    MissingSection(&'static str),
    #[error("MultipleObjectives (line {line}): second N row `{name}`")]
    MultipleObjectives { line: usize, name: String },
    #[error("UnknownRowType (line {line}): `{token}`")]
    UnknownRowType { line: usize, token: String },
    #[error("ReopenedColumn (line {line}): entries for `{name}` are not contiguous")]
    ReopenedColumn { line: usize, name: String },
    #[error("DuplicateCoefficient (line {line}): ({row}, {var}) given twice")]
    DuplicateCoefficient { line: usize, row: String, var: String },
    #[error("UnknownBoundType (line {line}): `{token}`")]
    UnknownBoundType { line: usize, token: String },
    #[error("UnknownVariableInBounds (line {line}): `{name}`")]
    UnknownVariableInBounds { line: usize, name: String },
    #[error("TruncatedLine (line {line}): expected more fields")]
    TruncatedLine { line: usize },
    #[error("NoVariables: COLUMNS section declared none")]
    NoVariables,
    #[error("invalid instance: {0}")]
    Instance(#[from] InstanceError),
}

fn parse_value(token: &str, line: usize) -> Result<f64, MpsError> {
    match token {
        "+inf" | "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => token.parse::<f64>().map_err(|_| MpsError::MalformedNumeric {
            line,
            token: token.to_string(),
        }),
    }
}

fn format_value(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v}")
    }
}

struct VarDef {
    integer_marked: bool,
    binary: bool,
    obj: f64,
    entries: Vec<(usize, f64)>,
    lower: Option<f64>,
    upper: Option<f64>,
    bound_line_seen: bool,
}

/// Parses the documented MPS subset into a validated instance.
pub fn parse_mps(text: &str) -> Result<MilpInstance, MpsError> {
    // (line number, content) pairs with comments and blanks dropped.
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('*'))
        .collect();
    let mut pos = 0usize;

    let header = |pos: usize| -> Option<(usize, &str, &str)> {
        lines.get(pos).and_then(|&(num, l)| {
            if l.starts_with(char::is_whitespace) {
                None
            } else {
                let mut it = l.split_whitespace();
                let tok = it.next().unwrap_or("");
                Some((num, tok, it.next().unwrap_or("")))
            }
        })
    };

    // NAME
    let name = match header(pos) {
        Some((_, "NAME", rest)) => {
            pos += 1;
            rest.to_string()
        }
        Some((line, tok, _)) => {
            return Err(MpsError::UnknownSection {
                line,
                token: tok.to_string(),
            })
        }
        None => return Err(MpsError::MissingSection("NAME")),
    };

    // ROWS
    match header(pos) {
        Some((_, "ROWS", _)) => pos += 1,
        Some((line, tok, _)) => {
            return Err(MpsError::UnknownSection {
                line,
                token: tok.to_string(),
            })
        }
        None => return Err(MpsError::MissingSection("ROWS")),
    }
    let mut objective_row: Option<String> = None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut senses: Vec<Sense> = Vec::new();
    while let Some(&(line, l)) = lines.get(pos) {
        if !l.starts_with(char::is_whitespace) {
            break;
        }
        pos += 1;
        let mut it = l.split_whitespace();
        let kind = it.next().ok_or(MpsError::TruncatedLine { line })?;
        let name = it
            .next()
            .ok_or(MpsError::TruncatedLine { line })?
            .to_string();
        if objective_row.as_deref() == Some(&name) || row_index.contains_key(&name) {
            return Err(MpsError::DuplicateRow { line, name });
        }
        match kind {
            "N" => {
                if objective_row.is_some() {
                    return Err(MpsError::MultipleObjectives { line, name });
                }
                objective_row = Some(name);
            }
            "G" => {
                row_index.insert(name, senses.len());
                senses.push(Sense::Ge);
            }
            "L" => {
                row_index.insert(name, senses.len());
                senses.push(Sense::Le);
            }
            "E" => {
                row_index.insert(name, senses.len());
                senses.push(Sense::Eq);
            }
            other => {
                return Err(MpsError::UnknownRowType {
                    line,
                    token: other.to_string(),
                })
            }
        }
    }
    let objective_row = objective_row.ok_or(MpsError::MissingSection("ROWS (N row)"))?;

    // COLUMNS
    match header(pos) {
        Some((_, "COLUMNS", _)) => pos += 1,
        Some((line, tok, _)) => {
            return Err(MpsError::UnknownSection {
                line,
                token: tok.to_string(),
            })
        }
        None => return Err(MpsError::MissingSection("COLUMNS")),
    }
    let mut vars: Vec<VarDef> = Vec::new();
    let mut var_index: HashMap<String, usize> = HashMap::new();
    let mut in_integer = false;
    while let Some(&(line, l)) = lines.get(pos) {
        if !l.starts_with(char::is_whitespace) {
            break;
        }
        pos += 1;
        let fields: Vec<&str> = l.split_whitespace().collect();
        if fields.len() >= 3 && fields[1] == "'MARKER'" {
            match fields[2] {
                "'INTORG'" => in_integer = true,
                "'INTEND'" => in_integer = false,
                other => {
                    return Err(MpsError::UnknownSection {
                        line,
                        token: other.to_string(),
                    })
                }
            }
            continue;
        }
        let var_name = fields.first().ok_or(MpsError::TruncatedLine { line })?;
        let idx = match var_index.get(*var_name) {
            Some(&idx) => {
                if idx != vars.len() - 1 {
                    return Err(MpsError::ReopenedColumn {
                        line,
                        name: var_name.to_string(),
                    });
                }
                idx
            }
            None => {
                let idx = vars.len();
                var_index.insert(var_name.to_string(), idx);
                vars.push(VarDef {
                    integer_marked: in_integer,
                    binary: false,
                    obj: 0.0,
                    entries: Vec::new(),
                    lower: None,
                    upper: None,
                    bound_line_seen: false,
                });
                idx
            }
        };
        if fields.len() < 3 || fields.len().is_multiple_of(2) {
            return Err(MpsError::TruncatedLine { line });
        }
        for pair in fields[1..].chunks(2) {
            let row = pair[0];
            let value = parse_value(pair[1], line)?;
            if row == objective_row {
                if vars[idx].obj != 0.0 {
                    return Err(MpsError::DuplicateCoefficient {
                        line,
                        row: row.to_string(),
                        var: var_name.to_string(),
                    });
                }
                vars[idx].obj = value;
            } else if let Some(&r) = row_index.get(row) {
                if vars[idx].entries.iter().any(|&(er, _)| er == r) {
                    return Err(MpsError::DuplicateCoefficient {
                        line,
                        row: row.to_string(),
                        var: var_name.to_string(),
                    });
                }
                vars[idx].entries.push((r, value));
            } else {
                return Err(MpsError::UnknownRowInColumns {
                    line,
                    row: row.to_string(),
                });
            }
        }
    }
    if vars.is_empty() {
        return Err(MpsError::NoVariables);
    }

    // RHS
    let mut rhs = vec![0.0; senses.len()];
    if let Some((_, "RHS", _)) = header(pos) {
        pos += 1;
        while let Some(&(line, l)) = lines.get(pos) {
            if !l.starts_with(char::is_whitespace) {
                break;
            }
            pos += 1;
            let fields: Vec<&str> = l.split_whitespace().collect();
            if fields.len() < 3 || fields.len().is_multiple_of(2) {
                return Err(MpsError::TruncatedLine { line });
            }
            for pair in fields[1..].chunks(2) {
                let row = pair[0];
                let value = parse_value(pair[1], line)?;
                match row_index.get(row) {
                    Some(&r) => rhs[r] = value,
                    None => {
                        return Err(MpsError::UnknownRowInColumns {
                            line,
                            row: row.to_string(),
                        })
                    }
                }
            }
        }
    }

    // BOUNDS
    if let Some((_, "BOUNDS", _)) = header(pos) {
        pos += 1;
        while let Some(&(line, l)) = lines.get(pos) {
            if !l.starts_with(char::is_whitespace) {
                break;
            }
            pos += 1;
            let fields: Vec<&str> = l.split_whitespace().collect();
            if fields.len() < 3 {
                return Err(MpsError::TruncatedLine { line });
            }
            let bound_type = fields[0];
            let var_name = fields[2];
            let idx = *var_index.get(var_name).ok_or_else(|| {
                MpsError::UnknownVariableInBounds {
                    line,
                    name: var_name.to_string(),
                }
            })?;
            let var = &mut vars[idx];
            var.bound_line_seen = true;
            match bound_type {
                "LO" => {
                    let v = parse_value(
                        fields.get(3).ok_or(MpsError::TruncatedLine { line })?,
                        line,
                    )?;
                    var.lower = Some(v);
                }
                "UP" => {
                    let v = parse_value(
                        fields.get(3).ok_or(MpsError::TruncatedLine { line })?,
                        line,
                    )?;
                    var.upper = Some(v);
                }
                "FX" => {
                    let v = parse_value(
                        fields.get(3).ok_or(MpsError::TruncatedLine { line })?,
                        line,
                    )?;
                    var.lower = Some(v);
                    var.upper = Some(v);
                }
                "FR" => {
                    var.lower = Some(f64::NEG_INFINITY);
                    var.upper = Some(f64::INFINITY);
                }
                "BV" => {
                    var.binary = true;
                    var.lower = Some(0.0);
                    var.upper = Some(1.0);
                }
                other => {
                    return Err(MpsError::UnknownBoundType {
                        line,
                        token: other.to_string(),
                    })
                }
            }
        }
    }

    // ENDATA
    match header(pos) {
        Some((_, "ENDATA", _)) => {}
        Some((line, tok, _)) => {
            return Err(MpsError::UnknownSection {
                line,
                token: tok.to_string(),
            })
        }
        None => return Err(MpsError::MissingSection("ENDATA")),
    }

    let objective: Vec<f64> = vars.iter().map(|v| v.obj).collect();
    let mut constraints = Vec::new();
    for (j, v) in vars.iter().enumerate() {
        for &(r, value) in &v.entries {
            constraints.push((r, j, value));
        }
    }
    let var_kinds: Vec<VarKind> = vars
        .iter()
        .map(|v| {
            if v.binary {
                VarKind::Binary
            } else if v.integer_marked {
                VarKind::Integer
            } else {
                VarKind::Continuous
            }
        })
        .collect();
    let var_bounds: Vec<(f64, f64)> = vars
        .iter()
        .map(|v| {
            if v.integer_marked && !v.bound_line_seen {
                (0.0, 1.0)
            } else {
                (v.lower.unwrap_or(0.0), v.upper.unwrap_or(f64::INFINITY))
            }
        })
        .collect();

    Ok(MilpInstance::new(
        name, objective, constraints, rhs, senses, var_kinds, var_bounds,
    )?)
}

/// Serializes an instance in canonical form: variables `x0..` in index
/// order, rows `c0..` in index order, objective row `OBJ`, one coefficient
/// pair per line. `parse_mps(write_mps(i)) == i` for every valid instance.
pub fn write_mps(instance: &MilpInstance) -> String {
    let n = instance.num_vars();
    let mut out = String::new();
    let _ = writeln!(out, "NAME {}", instance.name);
    out.push_str("ROWS\n N OBJ\n");
    for (i, sense) in instance.senses.iter().enumerate() {
        let tag = match sense {
            Sense::Ge => 'G',
            Sense::Le => 'L',
            Sense::Eq => 'E',
        };
        let _ = writeln!(out, " {tag} c{i}");
    }

    let mut per_var: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(r, c, v) in &instance.constraints {
        per_var[c].push((r, v));
    }

    out.push_str("COLUMNS\n");
    let mut in_integer = false;
    #[allow(clippy::needless_range_loop)]
    for j in 0..n {
        let wants_marker = instance.var_kinds[j] == VarKind::Integer;
        if wants_marker && !in_integer {
            out.push_str("    MARKER 'MARKER' 'INTORG'\n");
            in_integer = true;
        } else if !wants_marker && in_integer {
            out.push_str("    MARKER 'MARKER' 'INTEND'\n");
            in_integer = false;
        }
        // Every variable gets an objective entry so it exists on re-parse.
        let _ = writeln!(out, "    x{j} OBJ {}", format_value(instance.objective[j]));
        for &(r, v) in &per_var[j] {
            let _ = writeln!(out, "    x{j} c{r} {}", format_value(v));
        }
    }
    if in_integer {
        out.push_str("    MARKER 'MARKER' 'INTEND'\n");
    }

    out.push_str("RHS\n");
    for (i, &b) in instance.rhs.iter().enumerate() {
        if b != 0.0 {
            let _ = writeln!(out, "    RHS c{i} {}", format_value(b));
        }
    }

    out.push_str("BOUNDS\n");
    for j in 0..n {
        let (lo, up) = instance.var_bounds[j];
        match instance.var_kinds[j] {
            VarKind::Binary => {
                let _ = writeln!(out, " BV BND x{j}");
                if lo != 0.0 {
                    let _ = writeln!(out, " LO BND x{j} {}", format_value(lo));
                }
                if up != 1.0 {
                    let _ = writeln!(out, " UP BND x{j} {}", format_value(up));
                }
            }
            VarKind::Integer => {
                if (lo, up) == (0.0, 1.0) {
                    continue; // marker default
                }
                if lo == up {
                    let _ = writeln!(out, " FX BND x{j} {}", format_value(lo));
                } else {
                    // Always pin the lower side so the [0, 1] marker default
                    // does not reapply on re-parse.
                    let _ = writeln!(out, " LO BND x{j} {}", format_value(lo));
                    if up != f64::INFINITY {
                        let _ = writeln!(out, " UP BND x{j} {}", format_value(up));
                    }
                }
            }
            VarKind::Continuous => {
                if lo == f64::NEG_INFINITY && up == f64::INFINITY {
                    let _ = writeln!(out, " FR BND x{j}");
                } else if lo == up {
                    let _ = writeln!(out, " FX BND x{j} {}", format_value(lo));
                } else {
                    if lo != 0.0 {
                        let _ = writeln!(out, " LO BND x{j} {}", format_value(lo));
                    }
                    if up != f64::INFINITY {
                        let _ = writeln!(out, " UP BND x{j} {}", format_value(up));
                    }
                }
            }
        }
    }

    out.push_str("ENDATA\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_ge_file() {
        let text = "\
NAME MIN1
ROWS
 N OBJ
 G c1
COLUMNS
    x1 OBJ 1
    x1 c1 1
RHS
    RHS c1 1
ENDATA
";
        let inst = parse_mps(text).unwrap();
        assert_eq!(inst.num_vars(), 1);
        assert_eq!(inst.num_constraints(), 1);
        assert_eq!(inst.senses, vec![Sense::Ge]);
        assert_eq!(inst.rhs, vec![1.0]);
        assert_eq!(inst.var_kinds, vec![VarKind::Continuous]);
        assert_eq!(inst.var_bounds, vec![(0.0, f64::INFINITY)]);
    }

    #[test]
    fn intorg_block_marks_integers_with_unit_default_bounds() {
        let text = "\
NAME INTS
ROWS
 N OBJ
 L cap
COLUMNS
    MARKER 'MARKER' 'INTORG'
    x1 OBJ 2 cap 1
    x2 OBJ 3 cap 2
    MARKER 'MARKER' 'INTEND'
RHS
    RHS cap 5
ENDATA
";
        // Cross-checked against a hand-read of the file: two integer
        // variables, obj (2, 3), one LE row with entries (1, 2), rhs 5,
        // marker-default bounds [0, 1] each.
        let inst = parse_mps(text).unwrap();
        assert_eq!(inst.num_integral(), 2);
        assert_eq!(
            inst.var_kinds,
            vec![VarKind::Integer, VarKind::Integer]
        );
        assert_eq!(inst.objective, vec![2.0, 3.0]);
        assert_eq!(inst.constraints, vec![(0, 0, 1.0), (0, 1, 2.0)]);
        assert_eq!(inst.rhs, vec![5.0]);
        assert_eq!(inst.var_bounds, vec![(0.0, 1.0), (0.0, 1.0)]);
    }

    #[test]
    fn columns_before_rows_is_unknown_row() {
        let text = "\
NAME BAD
COLUMNS
    x1 OBJ 1
ROWS
 N OBJ
ENDATA
";
        // COLUMNS appears where ROWS is expected; the header scan rejects it.
        let err = parse_mps(text).unwrap_err();
        assert!(matches!(err, MpsError::UnknownSection { line: 2, .. }));
        // A declared-but-empty ROWS section surfaces the undeclared row.
        let text2 = "\
NAME BAD2
ROWS
 N OBJ
COLUMNS
    x1 OBJ 1 c9 1
RHS
ENDATA
";
        let err2 = parse_mps(text2).unwrap_err();
        assert_eq!(
            err2,
            MpsError::UnknownRowInColumns {
                line: 5,
                row: "c9".to_string()
            }
        );
    }

    #[test]
    fn duplicate_row_is_rejected_with_line() {
        let text = "\
NAME DUP
ROWS
 N OBJ
 G r1
 G r1
COLUMNS
    x1 OBJ 1
ENDATA
";
        assert_eq!(
            parse_mps(text).unwrap_err(),
            MpsError::DuplicateRow {
                line: 5,
                name: "r1".to_string()
            }
        );
    }

    #[test]
    fn malformed_numeric_names_the_line() {
        let text = "\
NAME NUM
ROWS
 N OBJ
COLUMNS
    x1 OBJ abc
ENDATA
";
        assert_eq!(
            parse_mps(text).unwrap_err(),
            MpsError::MalformedNumeric {
                line: 5,
                token: "abc".to_string()
            }
        );
    }

    #[test]
    fn infinite_upper_bound_round_trips() {
        let inst = MilpInstance::new(
            "inf",
            vec![1.0, -1.0],
            vec![(0, 0, 1.0), (0, 1, 2.0)],
            vec![3.0],
            vec![Sense::Le],
            vec![VarKind::Continuous, VarKind::Integer],
            vec![(0.0, f64::INFINITY), (0.0, f64::INFINITY)],
        )
        .unwrap();
        let text = write_mps(&inst);
        assert!(!text.contains("UP BND x0"));
        let back = parse_mps(&text).unwrap();
        assert_eq!(back.var_bounds[0].1, f64::INFINITY);
        assert_eq!(back.var_bounds[1].1, f64::INFINITY);
        assert_eq!(back, inst);
    }

    #[test]
    fn eq_sense_round_trips() {
        let inst = MilpInstance::new(
            "eq",
            vec![1.0],
            vec![(0, 0, 1.0)],
            vec![2.0],
            vec![Sense::Eq],
            vec![VarKind::Continuous],
            vec![(0.0, 5.0)],
        )
        .unwrap();
        let text = write_mps(&inst);
        assert!(text.contains(" E c0"));
        assert_eq!(parse_mps(&text).unwrap(), inst);
    }

    #[test]
    fn binary_and_free_vars_round_trip() {
        let inst = MilpInstance::new(
            "mix",
            vec![1.0, 0.0, -2.5],
            vec![(0, 0, 1.0), (0, 2, -1.0)],
            vec![0.0],
            vec![Sense::Ge],
            vec![VarKind::Binary, VarKind::Continuous, VarKind::Integer],
            vec![(0.0, 1.0), (f64::NEG_INFINITY, f64::INFINITY), (-3.0, 7.0)],
        )
        .unwrap();
        assert_eq!(parse_mps(&write_mps(&inst)).unwrap(), inst);
    }
}
