//! Symbolic partial derivatives.
//!
//! The builders below fold constants and drop additive/multiplicative
//! identities so derivative trees stay readable. No further simplification
//! is attempted; results are only required to evaluate correctly.

use super::{BinaryOp, Expr, Func};

fn constant(e: &Expr) -> Option<f64> {
    match e {
        Expr::Const(c) => Some(*c),
        _ => None,
    }
}

fn is(e: &Expr, v: f64) -> bool {
    constant(e) == Some(v)
}

pub(super) fn add(a: Expr, b: Expr) -> Expr {
    match (constant(&a), constant(&b)) {
        (Some(x), Some(y)) => Expr::Const(x + y),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => match b {
            Expr::Neg(inner) => Expr::Binary(BinaryOp::Sub, a.into(), inner),
            b => Expr::binary(BinaryOp::Add, a, b),
        },
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (constant(&a), constant(&b)) {
        (Some(x), Some(y)) => Expr::Const(x - y),
        (_, Some(0.0)) => a,
        (Some(0.0), _) => neg(b),
        _ => match b {
            Expr::Neg(inner) => Expr::Binary(BinaryOp::Add, a.into(), inner),
            b => Expr::binary(BinaryOp::Sub, a, b),
        },
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (constant(&a), constant(&b)) {
        (Some(x), Some(y)) => Expr::Const(x * y),
        (Some(0.0), _) => Expr::Const(0.0),
        (_, Some(0.0)) => Expr::Const(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        (Some(-1.0), _) => neg(b),
        (_, Some(-1.0)) => neg(a),
        _ => Expr::binary(BinaryOp::Mul, a, b),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (constant(&a), constant(&b)) {
        (Some(x), Some(y)) if y != 0.0 => Expr::Const(x / y),
        (Some(0.0), _) => Expr::Const(0.0),
        (_, Some(1.0)) => a,
        _ => Expr::binary(BinaryOp::Div, a, b),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match (constant(&a), constant(&b)) {
        (Some(x), Some(y)) => Expr::Const(libm::pow(x, y)),
        (_, Some(1.0)) => a,
        (_, Some(0.0)) => Expr::Const(1.0),
        _ => Expr::binary(BinaryOp::Pow, a, b),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        a => Expr::neg(a),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    match constant(&a) {
        Some(c) => Expr::Const(f.apply(c)),
        None => Expr::call(f, a),
    }
}

impl Expr {
    /// Partial derivative with respect to the zero-based variable `var`.
    ///
    /// `abs` differentiates to `sign`, which is 0 at 0. A power with a
    /// non-constant exponent is differentiated as `exp(v*log(u))`, so its
    /// derivative is only meaningful where the base is positive.
    pub fn differentiate(&self, var: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(i) => Expr::Const(if *i == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.differentiate(var)),
            Expr::Binary(op, a, b) => {
                let (u, v) = (&**a, &**b);
                match op {
                    BinaryOp::Add => add(u.differentiate(var), v.differentiate(var)),
                    BinaryOp::Sub => sub(u.differentiate(var), v.differentiate(var)),
                    BinaryOp::Mul => add(
                        mul(u.differentiate(var), v.clone()),
                        mul(u.clone(), v.differentiate(var)),
                    ),
                    BinaryOp::Div => div(
                        sub(
                            mul(u.differentiate(var), v.clone()),
                            mul(u.clone(), v.differentiate(var)),
                        ),
                        pow(v.clone(), Expr::Const(2.0)),
                    ),
                    BinaryOp::Pow => power_derivative(u, v, var),
                }
            }
            Expr::Call(f, a) => {
                let du = a.differentiate(var);
                if is(&du, 0.0) {
                    return Expr::Const(0.0);
                }
                let u = (**a).clone();
                let outer = match f {
                    Func::Sin => call(Func::Cos, u),
                    Func::Cos => neg(call(Func::Sin, u)),
                    Func::Exp => call(Func::Exp, u),
                    Func::Log => return div(du, u),
                    Func::Sqrt => {
                        return div(du, mul(Expr::Const(2.0), call(Func::Sqrt, u)));
                    }
                    Func::Tanh => sub(Expr::Const(1.0), pow(call(Func::Tanh, u), Expr::Const(2.0))),
                    Func::Abs => call(Func::Sign, u),
                    Func::Sign => return Expr::Const(0.0),
                };
                mul(outer, du)
            }
        }
    }
}

fn power_derivative(u: &Expr, v: &Expr, var: usize) -> Expr {
    if !v.depends_on(var) {
        // Exponent free of `var`: v * u^(v-1) * u'
        let du = u.differentiate(var);
        if is(&du, 0.0) {
            return Expr::Const(0.0);
        }
        let lowered = sub(v.clone(), Expr::Const(1.0));
        return mul(mul(v.clone(), pow(u.clone(), lowered)), du);
    }
    // u^v = exp(v log u)  =>  u^v * (v' log u + v u' / u)
    let du = u.differentiate(var);
    let dv = v.differentiate(var);
    let log_term = mul(dv, call(Func::Log, u.clone()));
    let base_term = if is(&du, 0.0) {
        Expr::Const(0.0)
    } else {
        div(mul(v.clone(), du), u.clone())
    };
    mul(pow(u.clone(), v.clone()), add(log_term, base_term))
}
