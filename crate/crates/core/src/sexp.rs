//! S-expression formula files.
//!
//! ```text
//! (declare v Real)
//! (declare p Bool)
//! (and (<= (+ v (* 2 w)) 5) (or p (not q)))
//! ```
//!
//! Every top-level form other than `declare` is an assertion; the file
//! denotes their conjunction. `;` starts a comment.

use thiserror::Error;

use crate::formula::{parse_rational, Formula, LinExpr, Rational, Sort, VariableRegistry};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{line}:{col}: {message}")]
pub struct SexpError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
enum Sexp {
    Atom(String, Pos),
    List(Vec<Sexp>, Pos),
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Pos {
    line: usize,
    col: usize,
}

impl Sexp {
    fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }
}

fn error(pos: Pos, message: impl Into<String>) -> SexpError {
    SexpError {
        line: pos.line,
        col: pos.col,
        message: message.into(),
    }
}

fn read_all(text: &str) -> Result<Vec<Sexp>, SexpError> {
    let mut stack: Vec<(Vec<Sexp>, Pos)> = Vec::new();
    let mut top = Vec::new();
    let mut atom = String::new();
    let mut atom_pos = Pos { line: 1, col: 1 };

    fn flush(atom: &mut String, pos: Pos, stack: &mut [(Vec<Sexp>, Pos)], top: &mut Vec<Sexp>) {
        if !atom.is_empty() {
            let a = Sexp::Atom(std::mem::take(atom), pos);
            match stack.last_mut() {
                Some((items, _)) => items.push(a),
                None => top.push(a),
            }
        }
    }

    for (i, line) in text.lines().enumerate() {
        for (j, c) in line.char_indices() {
            let pos = Pos {
                line: i + 1,
                col: j + 1,
            };
            match c {
                ';' => break,
                '(' | ')' | ' ' | '\t' | '\r' => {
                    flush(&mut atom, atom_pos, &mut stack, &mut top);
                    if c == '(' {
                        stack.push((Vec::new(), pos));
                    } else if c == ')' {
                        let (items, open) =
                            stack.pop().ok_or_else(|| error(pos, "unbalanced `)`"))?;
                        let list = Sexp::List(items, open);
                        match stack.last_mut() {
                            Some((items, _)) => items.push(list),
                            None => top.push(list),
                        }
                    }
                }
                _ => {
                    if atom.is_empty() {
                        atom_pos = pos;
                    }
                    atom.push(c);
                }
            }
        }
        flush(&mut atom, atom_pos, &mut stack, &mut top);
    }
    if let Some((_, open)) = stack.last() {
        return Err(error(*open, "unclosed `(`"));
    }
    Ok(top)
}

/// A parsed formula file.
#[derive(Clone, Debug, PartialEq)]
pub struct FormulaFile {
    pub registry: VariableRegistry,
    pub formula: Formula,
}

pub fn parse_formula_file(text: &str) -> Result<FormulaFile, SexpError> {
    let mut registry = VariableRegistry::new();
    let mut assertions = Vec::new();
    for form in read_all(text)? {
        if let Sexp::List(items, pos) = &form {
            if matches!(items.first(), Some(Sexp::Atom(h, _)) if h == "declare") {
                let [_, Sexp::Atom(name, _), Sexp::Atom(sort, sort_pos)] = items.as_slice() else {
                    return Err(error(*pos, "expected (declare <name> Bool|Real)"));
                };
                let sort = match sort.as_str() {
                    "Bool" => Sort::Bool,
                    "Real" => Sort::Real,
                    other => return Err(error(*sort_pos, format!("unknown sort `{other}`"))),
                };
                registry
                    .declare(name, sort)
                    .map_err(|e| error(*pos, e.to_string()))?;
                continue;
            }
        }
        assertions.push(form);
    }
    let parser = Parser {
        registry: &registry,
    };
    let formula = Formula::and(
        assertions
            .iter()
            .map(|f| parser.formula(f))
            .collect::<Result<Vec<_>, _>>()?,
    );
    Ok(FormulaFile { registry, formula })
}

/// Parse a single formula against an existing registry.
pub fn parse_formula(text: &str, registry: &VariableRegistry) -> Result<Formula, SexpError> {
    let forms = read_all(text)?;
    let parser = Parser { registry };
    let parts = forms
        .iter()
        .map(|f| parser.formula(f))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Formula::and(parts))
}

struct Parser<'a> {
    registry: &'a VariableRegistry,
}

const RELATIONS: [&str; 7] = ["<", "<=", "=", ">=", ">", "distinct", "!="];

impl Parser<'_> {
    fn is_boolean(&self, e: &Sexp) -> bool {
        match e {
            Sexp::Atom(a, _) => {
                a == "true"
                    || a == "false"
                    || self
                        .registry
                        .lookup(a)
                        .is_some_and(|id| self.registry.sort(id) == Some(Sort::Bool))
            }
            Sexp::List(items, _) => matches!(
                items.first(),
                Some(Sexp::Atom(h, _)) if ["and", "or", "not", "=>", "implies"].contains(&h.as_str())
                    || RELATIONS.contains(&h.as_str())
            ),
        }
    }

    fn formula(&self, e: &Sexp) -> Result<Formula, SexpError> {
        let (items, pos) = match e {
            Sexp::Atom(a, pos) => {
                return match a.as_str() {
                    "true" => Ok(Formula::True),
                    "false" => Ok(Formula::False),
                    name => match self.registry.lookup(name) {
                        Some(id) if self.registry.sort(id) == Some(Sort::Bool) => {
                            Ok(Formula::var(id))
                        }
                        Some(_) => {
                            Err(error(*pos, format!("`{name}` is Real, expected a formula")))
                        }
                        None => Err(error(*pos, format!("undeclared variable `{name}`"))),
                    },
                }
            }
            Sexp::List(items, pos) => (items, *pos),
        };
        let Some(Sexp::Atom(head, _)) = items.first() else {
            return Err(error(pos, "expected an operator"));
        };
        let args = &items[1..];
        let formulas = || {
            args.iter()
                .map(|a| self.formula(a))
                .collect::<Result<Vec<_>, _>>()
        };
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(error(pos, format!("`{head}` takes {n} argument(s)")))
            }
        };
        match head.as_str() {
            "and" => Ok(Formula::and(formulas()?)),
            "or" => Ok(Formula::or(formulas()?)),
            "not" => {
                arity(1)?;
                Ok(!self.formula(&args[0])?)
            }
            "=>" | "implies" => {
                arity(2)?;
                Ok(self.formula(&args[0])?.implies(self.formula(&args[1])?))
            }
            "=" if args.iter().all(|a| self.is_boolean(a)) => {
                let fs = formulas()?;
                if fs.len() < 2 {
                    return Err(error(pos, "`=` takes at least 2 arguments"));
                }
                Ok(Formula::and(fs.windows(2).map(|w| {
                    (w[0].clone() & w[1].clone()) | (!w[0].clone() & !w[1].clone())
                })))
            }
            rel if RELATIONS.contains(&rel) => {
                if args.len() < 2 {
                    return Err(error(pos, format!("`{rel}` takes at least 2 arguments")));
                }
                let terms = args
                    .iter()
                    .map(|a| self.term(a))
                    .collect::<Result<Vec<_>, _>>()?;
                let compare = |l: &LinExpr, r: &LinExpr| {
                    let (l, r) = (l.clone(), r.clone());
                    match rel {
                        "<" => l.lt(r),
                        "<=" => l.le(r),
                        "=" => l.eq(r),
                        ">=" => l.ge(r),
                        ">" => l.gt(r),
                        _ => l.ne(r),
                    }
                };
                Ok(Formula::and(if rel == "distinct" || rel == "!=" {
                    let mut pairs = Vec::new();
                    for i in 0..terms.len() {
                        for j in i + 1..terms.len() {
                            pairs.push(compare(&terms[i], &terms[j]));
                        }
                    }
                    pairs
                } else {
                    terms.windows(2).map(|w| compare(&w[0], &w[1])).collect()
                }))
            }
            other => Err(error(pos, format!("unknown operator `{other}`"))),
        }
    }

    fn constant(&self, e: &Sexp) -> Result<Option<Rational>, SexpError> {
        let t = self.term(e)?;
        Ok(t.coeffs().is_empty().then(|| t.constant_term().clone()))
    }

    fn term(&self, e: &Sexp) -> Result<LinExpr, SexpError> {
        let (items, pos) = match e {
            Sexp::Atom(a, pos) => {
                if let Some(id) = self.registry.lookup(a) {
                    return match self.registry.sort(id) {
                        Some(Sort::Real) => Ok(LinExpr::var(id)),
                        _ => Err(error(*pos, format!("`{a}` is Bool, expected a real term"))),
                    };
                }
                return parse_rational(a)
                    .map(LinExpr::constant)
                    .map_err(|_| error(*pos, format!("undeclared variable or bad number `{a}`")));
            }
            Sexp::List(items, pos) => (items, *pos),
        };
        let Some(Sexp::Atom(head, _)) = items.first() else {
            return Err(error(pos, "expected an operator"));
        };
        let args = &items[1..];
        if args.is_empty() {
            return Err(error(pos, format!("`{head}` needs arguments")));
        }
        match head.as_str() {
            "+" => args.iter().try_fold(
                LinExpr::constant(Rational::from_integer(0.into())),
                |acc, a| Ok(acc + self.term(a)?),
            ),
            "-" if args.len() == 1 => Ok(-self.term(&args[0])?),
            "-" => args[1..]
                .iter()
                .try_fold(self.term(&args[0])?, |acc, a| Ok(acc - self.term(a)?)),
            "*" => {
                let mut scale = Rational::from_integer(1.into());
                let mut linear: Option<LinExpr> = None;
                for a in args {
                    match self.constant(a)? {
                        Some(c) => scale *= c,
                        None if linear.is_none() => linear = Some(self.term(a)?),
                        None => return Err(error(a.pos(), "nonlinear product")),
                    }
                }
                Ok(match linear {
                    Some(l) => l * scale,
                    None => LinExpr::constant(scale),
                })
            }
            "/" => {
                if args.len() != 2 {
                    return Err(error(pos, "`/` takes 2 arguments"));
                }
                match self.constant(&args[1])? {
                    Some(c) if c != Rational::from_integer(0.into()) => {
                        Ok(self.term(&args[0])? * (Rational::from_integer(1.into()) / c))
                    }
                    _ => Err(error(args[1].pos(), "divisor must be a nonzero constant")),
                }
            }
            other => Err(error(pos, format!("unknown term operator `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{rat, ratio, Assignment, Value};

    #[test]
    fn declarations_and_conjunction() {
        let f = parse_formula_file(
            "; comment\n(declare h Real)\n(declare p Bool)\n(>= h 6) ; trailing\n(or p (< h 0))\n",
        )
        .unwrap();
        assert_eq!(f.registry.len(), 2);
        let h = f.registry.lookup("h").unwrap();
        let p = f.registry.lookup("p").unwrap();
        let expected = LinExpr::var(h).ge(6) & (Formula::var(p) | LinExpr::var(h).lt(0));
        assert_eq!(f.formula, expected);
    }

    #[test]
    fn arithmetic() {
        let mut r = VariableRegistry::new();
        r.real_var("x").unwrap();
        r.real_var("y").unwrap();
        let f = parse_formula("(<= (+ (* 2 x) (- y) (/ x 4) 0.5) (- 3 1/2))", &r).unwrap();
        let a = Assignment::from_values(&r, vec![Value::Real(rat(1)), Value::Real(ratio(1, 4))])
            .unwrap();
        // 2 - 1/4 + 1/4 + 1/2 = 5/2 <= 5/2
        assert!(f.eval(&a).unwrap());
        assert!(parse_formula("(< (* x y) 1)", &r).is_err());
        assert!(parse_formula("(< (/ x 0) 1)", &r).is_err());
        assert!(parse_formula("(<= x y x)", &r).is_ok());
    }

    #[test]
    fn boolean_equality_and_distinct() {
        let mut r = VariableRegistry::new();
        let p = r.bool_var("p").unwrap();
        let q = r.bool_var("q").unwrap();
        let x = r.real_var("x").unwrap();
        let iff = parse_formula("(= p q)", &r).unwrap();
        for (vp, vq) in [(false, false), (false, true), (true, false), (true, true)] {
            let a = Assignment::from_values(
                &r,
                vec![Value::Bool(vp), Value::Bool(vq), Value::Real(rat(0))],
            )
            .unwrap();
            assert_eq!(iff.eval(&a).unwrap(), vp == vq);
        }
        assert_eq!(
            parse_formula("(distinct x 1)", &r).unwrap(),
            LinExpr::var(x).ne(1)
        );
        let _ = (p, q);
    }

    #[test]
    fn errors_have_positions() {
        let e = parse_formula_file("(declare x Real)\n(< x y)").unwrap_err();
        assert_eq!((e.line, e.col), (2, 6));
        assert!(parse_formula_file("(and true").is_err());
        assert!(parse_formula_file(")").is_err());
        assert!(parse_formula_file("(declare x Int)").is_err());
        assert!(parse_formula_file("(declare x Real)\n(not x)").is_err());
        assert!(parse_formula_file("(declare x Real)\n(declare x Bool)").is_err());
    }
}
