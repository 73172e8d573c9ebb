//! Arithmetic expressions over the state variables `x1..xD`.
//!
//! Drift and observation functions are written in a small text language:
//! numeric literals, variables `x1`, `x2`, ..., the binary operators
//! `+ - * / ^`, unary minus, parentheses and the functions `sin`, `cos`,
//! `exp`, `log`, `sqrt`, `tanh`, `abs`. Precedence from tightest to loosest
//! is `^` (right associative), unary minus, `* /`, `+ -`, so `-x1^2` means
//! `-(x1^2)`.
//!
//! Parsed trees are immutable. They can be differentiated symbolically
//! ([`Expr::differentiate`]) and evaluated pointwise ([`Expr::eval`]).

mod diff;
mod parse;

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;

pub use parse::{parse, ParseError, ParseErrorKind};

/// Binary operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinaryOp::Add | BinaryOp::Sub => 1,
            BinaryOp::Mul | BinaryOp::Div => 2,
            BinaryOp::Pow => 4,
        }
    }

    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => a / b,
            BinaryOp::Pow => libm::pow(a, b),
        }
    }
}

/// Elementary functions of one argument.
///
/// `Sign` cannot be written in expression text; it only appears as the
/// derivative of `abs`, and evaluates to 0 at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
    Abs,
    Sign,
}

impl Func {
    /// Functions accepted by the parser.
    pub const PARSEABLE: [Func; 7] = [
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Tanh,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::PARSEABLE.into_iter().find(|f| f.name() == name)
    }

    pub fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => libm::sin(v),
            Func::Cos => libm::cos(v),
            Func::Exp => libm::exp(v),
            Func::Log => libm::log(v),
            Func::Sqrt => libm::sqrt(v),
            Func::Tanh => libm::tanh(v),
            Func::Abs => libm::fabs(v),
            Func::Sign => {
                if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else if v == 0.0 {
                    0.0
                } else {
                    v
                }
            }
        }
    }
}

/// Expression tree. Variables are stored zero-based: `Var(0)` is `x1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    /// Variable `x{index}` with a one-based index, as written in text.
    pub fn var(index: usize) -> Expr {
        assert!(index >= 1, "variables are numbered from x1");
        Expr::Var(index - 1)
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn call(func: Func, arg: Expr) -> Expr {
        Expr::Call(func, Box::new(arg))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(arg: Expr) -> Expr {
        Expr::Neg(Box::new(arg))
    }

    /// Evaluates at `point`, where `point[0]` is the value of `x1`.
    ///
    /// Domain errors are not trapped: `log(-1)` is NaN and `1/0` is
    /// infinite, and the non-finite value propagates to the result.
    ///
    /// # Panics
    /// If `point` is shorter than the largest variable index used.
    pub fn eval(&self, point: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => point[*i],
            Expr::Neg(a) => -a.eval(point),
            Expr::Binary(op, a, b) => op.apply(a.eval(point), b.eval(point)),
            Expr::Call(f, a) => f.apply(a.eval(point)),
        }
    }

    /// One plus the largest zero-based variable index referenced, i.e. the
    /// smallest dimension this expression can be evaluated in.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(a) | Expr::Call(_, a) => a.arity(),
            Expr::Binary(_, a, b) => a.arity().max(b.arity()),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.arity() == 0
    }

    pub fn depends_on(&self, var: usize) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(i) => *i == var,
            Expr::Neg(a) | Expr::Call(_, a) => a.depends_on(var),
            Expr::Binary(_, a, b) => a.depends_on(var) || b.depends_on(var),
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Call(_, a) => 1 + a.size(),
            Expr::Binary(_, a, b) => 1 + a.size() + b.size(),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, _, _) => op.precedence(),
            Expr::Neg(_) => 3,
            _ => 5,
        }
    }
}

/// Sum of `df_d/dx_d` over the components of a vector field.
///
/// `field[d]` is the component along `x{d+1}`.
pub fn divergence(field: &[Expr]) -> Expr {
    field
        .iter()
        .enumerate()
        .map(|(d, f)| f.differentiate(d))
        .fold(Expr::Const(0.0), diff::add)
}

/// Evaluates each expression at `point`, writing into `out`.
pub fn eval_all(exprs: &[Expr], point: &[f64], out: &mut [f64]) {
    for (o, e) in out.iter_mut().zip(exprs) {
        *o = e.eval(point);
    }
}

/// Evaluates each expression at `point` into a fresh vector.
pub fn eval_vec(exprs: &[Expr], point: &[f64]) -> Vec<f64> {
    exprs.iter().map(|e| e.eval(point)).collect()
}

impl fmt::Display for Expr {
    /// Prints text that [`parse`] reads back to the same tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.is_sign_negative() {
                    write!(f, "({c})")
                } else {
                    write!(f, "{c}")
                }
            }
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => {
                // `-2` would read back as a negative literal.
                if matches!(**a, Expr::Const(_)) || a.precedence() < 3 {
                    write!(f, "-({a})")
                } else {
                    write!(f, "-{a}")
                }
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                let (left_parens, right_parens) = if *op == BinaryOp::Pow {
                    (a.precedence() <= p, b.precedence() < p)
                } else {
                    (a.precedence() < p, b.precedence() <= p)
                };
                if left_parens {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if right_parens {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
        }
    }
}
