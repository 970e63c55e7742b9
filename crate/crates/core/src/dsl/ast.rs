use std::fmt;

use num_rational::Ratio;

use crate::trace::ChannelDecl;

/// Exact decimal literal.
pub type Rational = Ratio<i64>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyAst {
    pub name: String,
    pub inputs: Vec<ChannelDecl>,
    pub outputs: Vec<ChannelDecl>,
    pub clocks: Vec<String>,
    pub locations: Vec<LocationAst>,
    pub transitions: Vec<TransitionAst>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocationAst {
    pub name: String,
    pub accepting: bool,
    pub initial: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionAst {
    pub from: String,
    pub to: String,
    pub guard: GuardExpr,
    /// Clocks reset on this edge, without duplicates, in source order.
    pub resets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GuardExpr {
    /// Empty conjunction is `true`.
    Conjunction(Vec<GuardExpr>),
    Comparison(Comparison),
}

impl GuardExpr {
    pub fn always() -> Self {
        GuardExpr::Conjunction(Vec::new())
    }

    /// All comparison atoms, depth first.
    pub fn atoms(&self) -> Vec<&Comparison> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Comparison>) {
        match self {
            GuardExpr::Conjunction(children) => children.iter().for_each(|c| c.collect_atoms(out)),
            GuardExpr::Comparison(c) => out.push(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
    Ne,
}

impl CmpOp {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ne => lhs != rhs,
        }
    }

    /// The operator with its operands swapped: `a op b` iff `b op.flip() a`.
    pub fn flip(self) -> Self {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Ge => CmpOp::Le,
            CmpOp::Gt => CmpOp::Lt,
            other => other,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "==",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
            CmpOp::Ne => "!=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comparison {
    pub lhs: Term,
    pub op: CmpOp,
    pub rhs: Term,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Const(Rational),
    ChannelRef(String),
    ClockRef(String),
    FnCall { name: String, args: Vec<Term> },
    Neg(Box<Term>),
}

impl Term {
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Term)) {
        f(self);
        match self {
            Term::FnCall { args, .. } => args.iter().for_each(|a| a.visit(f)),
            Term::Neg(inner) => inner.visit(f),
            _ => {}
        }
    }
}

pub(crate) fn rational_to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Writes a rational whose denominator only has factors 2 and 5 as an exact
/// decimal. Other rationals cannot come out of the parser; they fall back to
/// the nearest `f64`.
fn write_rational(f: &mut fmt::Formatter<'_>, r: &Rational) -> fmt::Result {
    let (num, den) = (*r.numer(), *r.denom());
    let mut d = den;
    let mut digits = 0u32;
    let (mut twos, mut fives) = (0u32, 0u32);
    while d % 2 == 0 {
        d /= 2;
        twos += 1;
    }
    while d % 5 == 0 {
        d /= 5;
        fives += 1;
    }
    if d != 1 {
        return write!(f, "{}", rational_to_f64(r));
    }
    digits += twos.max(fives);
    let scale = 10i128.pow(digits);
    let scaled = num as i128 * (scale / den as i128);
    let sign = if scaled < 0 { "-" } else { "" };
    let abs = scaled.unsigned_abs();
    let int_part = abs / scale as u128;
    let frac_part = abs % scale as u128;
    if digits == 0 {
        write!(f, "{sign}{int_part}")
    } else {
        write!(f, "{sign}{int_part}.{frac_part:0width$}", width = digits as usize)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(r) => write_rational(f, r),
            Term::ChannelRef(n) | Term::ClockRef(n) => f.write_str(n),
            Term::FnCall { name, args } => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            Term::Neg(inner) => write!(f, "-{inner}"),
        }
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op.symbol(), self.rhs)
    }
}

impl fmt::Display for GuardExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GuardExpr::Comparison(c) => write!(f, "{c}"),
            GuardExpr::Conjunction(children) if children.is_empty() => f.write_str("true"),
            GuardExpr::Conjunction(children) => {
                for (i, child) in children.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" and ")?;
                    }
                    match child {
                        GuardExpr::Conjunction(inner) if !inner.is_empty() => write!(f, "({child})")?,
                        _ => write!(f, "{child}")?,
                    }
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for TransitionAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "transition {} -> {} when {}", self.from, self.to, self.guard)?;
        if !self.resets.is_empty() {
            write!(f, " reset {{ {} }}", self.resets.join(", "))?;
        }
        Ok(())
    }
}

/// Canonical source form; parses back to an identical AST.
impl fmt::Display for PolicyAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "policy {} {{", self.name)?;
        let channels = |decls: &[ChannelDecl]| {
            decls.iter().map(|c| format!("{}: {}", c.name, c.kind)).collect::<Vec<_>>().join(", ")
        };
        writeln!(f, "  inputs {{ {} }}", channels(&self.inputs))?;
        writeln!(f, "  outputs {{ {} }}", channels(&self.outputs))?;
        writeln!(f, "  clocks {{ {} }}", self.clocks.join(", "))?;
        writeln!(f, "  locations {{")?;
        for loc in &self.locations {
            let mut attrs = Vec::new();
            if loc.initial {
                attrs.push("initial");
            }
            if loc.accepting {
                attrs.push("accepting");
            }
            if attrs.is_empty() {
                writeln!(f, "    {},", loc.name)?;
            } else {
                writeln!(f, "    {}: {},", loc.name, attrs.join(" "))?;
            }
        }
        writeln!(f, "  }}")?;
        for t in &self.transitions {
            writeln!(f, "  {t}")?;
        }
        writeln!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_printing_is_exact() {
        let show = |n, d| Term::Const(Rational::new(n, d)).to_string();
        assert_eq!(show(6, 5), "1.2");
        assert_eq!(show(-3, 5), "-0.6");
        assert_eq!(show(6, 1), "6");
        assert_eq!(show(1, 8), "0.125");
        assert_eq!(show(7, 100), "0.07");
    }
}
