//! Compiled guard terms and the builtin function registry.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use smallvec::SmallVec;
use thiserror::Error;

use crate::dsl::CmpOp;
use crate::measures;
use crate::trace::{Valuation, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("`{name}` expects {expected} argument(s), got {got}")]
    Arity { name: String, expected: usize, got: usize },
    #[error("`{name}` argument {index} must be {expected}")]
    ArgKind { name: String, index: usize, expected: &'static str },
    #[error("comparison operand must be a scalar")]
    ArrayOperand,
    #[error("channel #{0} is missing from the valuation")]
    MissingChannel(usize),
    #[error("output channel read without an output valuation")]
    NoOutput,
    #[error("`{name}`: {message}")]
    Builtin { name: String, message: String },
}

/// Borrowed argument value.
#[derive(Debug, Clone, Copy)]
pub enum ValueRef<'a> {
    Scalar(f64),
    Array(&'a [f64]),
}

impl<'a> From<&'a Value> for ValueRef<'a> {
    fn from(v: &'a Value) -> Self {
        match v {
            Value::Scalar(s) => ValueRef::Scalar(*s),
            Value::Array(a) => ValueRef::Array(a),
        }
    }
}

/// A computable function usable in guards.
pub trait Builtin: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;
    fn call(&self, args: &[ValueRef<'_>]) -> Result<f64, EvalError>;
}

fn check_arity(name: &str, args: &[ValueRef<'_>], expected: usize) -> Result<(), EvalError> {
    if args.len() != expected {
        return Err(EvalError::Arity { name: name.to_string(), expected, got: args.len() });
    }
    Ok(())
}

fn scalar_arg(name: &str, args: &[ValueRef<'_>], index: usize) -> Result<f64, EvalError> {
    match args[index] {
        ValueRef::Scalar(v) => Ok(v),
        ValueRef::Array(_) => Err(EvalError::ArgKind { name: name.to_string(), index, expected: "a scalar" }),
    }
}

/// `min_front(R)`: minimum over the centered forward sector of a scan.
#[derive(Debug, Clone)]
pub struct MinFront {
    pub fov_deg: f64,
    pub sector_deg: f64,
}

impl Default for MinFront {
    fn default() -> Self {
        MinFront { fov_deg: measures::DEFAULT_FOV_DEG, sector_deg: measures::FRONT_SECTOR_DEG }
    }
}

impl Builtin for MinFront {
    fn name(&self) -> &str {
        "min_front"
    }

    fn call(&self, args: &[ValueRef<'_>]) -> Result<f64, EvalError> {
        check_arity("min_front", args, 1)?;
        match args[0] {
            ValueRef::Array(rays) if !rays.is_empty() => Ok(measures::min_front(rays, self.fov_deg, self.sector_deg)),
            ValueRef::Array(_) => {
                Err(EvalError::Builtin { name: "min_front".into(), message: "empty scan".into() })
            }
            ValueRef::Scalar(_) => {
                Err(EvalError::ArgKind { name: "min_front".into(), index: 0, expected: "an array" })
            }
        }
    }
}

/// `kin(distance, speed)`: minimum safe deceleration. Inside a guard a
/// non-positive distance yields `+inf` (no deceleration is safe).
#[derive(Debug, Clone)]
pub struct Kin {
    pub factor: f64,
}

impl Default for Kin {
    fn default() -> Self {
        Kin { factor: 1.0 }
    }
}

impl Builtin for Kin {
    fn name(&self) -> &str {
        "kin"
    }

    fn call(&self, args: &[ValueRef<'_>]) -> Result<f64, EvalError> {
        check_arity("kin", args, 2)?;
        let distance = scalar_arg("kin", args, 0)?;
        let speed = scalar_arg("kin", args, 1)?;
        Ok(measures::kin(distance, speed, self.factor).unwrap_or(f64::INFINITY))
    }
}

/// Name-keyed set of builtins available to elaboration.
#[derive(Debug, Clone)]
pub struct BuiltinRegistry {
    functions: HashMap<String, Arc<dyn Builtin>>,
}

impl BuiltinRegistry {
    pub fn empty() -> Self {
        BuiltinRegistry { functions: HashMap::new() }
    }

    pub fn register(&mut self, f: Arc<dyn Builtin>) -> &mut Self {
        self.functions.insert(f.name().to_string(), f);
        self
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn Builtin>> {
        self.functions.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.functions.keys().map(String::as_str)
    }
}

impl Default for BuiltinRegistry {
    fn default() -> Self {
        let mut reg = BuiltinRegistry::empty();
        reg.register(Arc::new(MinFront::default())).register(Arc::new(Kin::default()));
        reg
    }
}

/// Compiled term with channel and clock names resolved to indices.
#[derive(Debug, Clone)]
pub enum Expr {
    Const(f64),
    Input(usize),
    Output(usize),
    Clock(usize),
    Call(Arc<dyn Builtin>, Vec<Expr>),
    Neg(Box<Expr>),
}

/// What a guard is evaluated against. `clocks` already holds `χ + 1`.
#[derive(Debug, Clone, Copy)]
pub struct Env<'a> {
    pub input: &'a Valuation,
    pub output: Option<&'a Valuation>,
    pub clocks: &'a [u64],
}

impl Expr {
    pub fn mentions_output(&self) -> bool {
        match self {
            Expr::Output(_) => true,
            Expr::Call(_, args) => args.iter().any(Expr::mentions_output),
            Expr::Neg(inner) => inner.mentions_output(),
            _ => false,
        }
    }

    pub fn eval<'a>(&self, env: &Env<'a>) -> Result<ValueRef<'a>, EvalError> {
        Ok(match self {
            Expr::Const(c) => ValueRef::Scalar(*c),
            Expr::Input(i) => env.input.get(*i).ok_or(EvalError::MissingChannel(*i))?.into(),
            Expr::Output(i) => env.output.ok_or(EvalError::NoOutput)?.get(*i).ok_or(EvalError::MissingChannel(*i))?.into(),
            Expr::Clock(i) => ValueRef::Scalar(env.clocks[*i] as f64),
            Expr::Call(f, args) => {
                let vals: SmallVec<[ValueRef<'a>; 4]> = args.iter().map(|a| a.eval(env)).collect::<Result<_, _>>()?;
                ValueRef::Scalar(f.call(&vals)?)
            }
            Expr::Neg(inner) => ValueRef::Scalar(-inner.eval_scalar(env)?),
        })
    }

    pub fn eval_scalar(&self, env: &Env<'_>) -> Result<f64, EvalError> {
        match self.eval(env)? {
            ValueRef::Scalar(v) => Ok(v),
            ValueRef::Array(_) => Err(EvalError::ArrayOperand),
        }
    }
}

/// A comparison between two compiled terms.
#[derive(Debug, Clone)]
pub struct Atom {
    pub lhs: Expr,
    pub op: CmpOp,
    pub rhs: Expr,
}

impl Atom {
    pub fn holds(&self, env: &Env<'_>) -> Result<bool, EvalError> {
        Ok(self.op.holds(self.lhs.eval_scalar(env)?, self.rhs.eval_scalar(env)?))
    }

    pub fn mentions_output(&self) -> bool {
        self.lhs.mentions_output() || self.rhs.mentions_output()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_check_arguments() {
        let reg = BuiltinRegistry::default();
        let mf = reg.get("min_front").unwrap();
        let kin = reg.get("kin").unwrap();
        assert!(matches!(mf.call(&[ValueRef::Scalar(1.0)]), Err(EvalError::ArgKind { .. })));
        assert!(matches!(kin.call(&[ValueRef::Scalar(1.0)]), Err(EvalError::Arity { .. })));
        assert_eq!(kin.call(&[ValueRef::Scalar(1.0), ValueRef::Scalar(2.0)]).unwrap(), 2.0);
        assert_eq!(kin.call(&[ValueRef::Scalar(0.0), ValueRef::Scalar(2.0)]).unwrap(), f64::INFINITY);
        assert_eq!(mf.call(&[ValueRef::Array(&[3.0; 61])]).unwrap(), 3.0);
    }

    #[test]
    fn expression_evaluation() {
        let input = Valuation::new(vec![vec![2.0, 1.0, 2.0].into(), 4.0.into()]);
        let output = Valuation::scalars(&[-1.5]);
        let env = Env { input: &input, output: Some(&output), clocks: &[7] };
        let neg = Expr::Neg(Box::new(Expr::Input(1)));
        assert_eq!(neg.eval_scalar(&env).unwrap(), -4.0);
        assert_eq!(Expr::Clock(0).eval_scalar(&env).unwrap(), 7.0);
        assert!(matches!(Expr::Input(0).eval_scalar(&env), Err(EvalError::ArrayOperand)));
        let atom = Atom { lhs: Expr::Output(0), op: CmpOp::Le, rhs: Expr::Const(-1.5) };
        assert!(atom.holds(&env).unwrap());
        assert!(atom.mentions_output());
        let no_out = Env { output: None, ..env };
        assert_eq!(atom.holds(&no_out), Err(EvalError::NoOutput));
    }
}
