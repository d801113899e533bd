//! Constant folding in modular `2^width` arithmetic.

use super::ast::{mask, BinaryOp, Expr, ExprKind, UnaryOp};

/// The expression mentions a signal and has no compile-time value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotConstant;

/// Evaluate `expr` with every intermediate result reduced mod `2^width`.
/// Relational operators yield 0 or 1.
pub fn const_eval(expr: &Expr, width: u32) -> Result<u64, NotConstant> {
    assert!((1..=64).contains(&width), "width must be 1..=64");
    let m = mask(width);
    let v = match &expr.kind {
        ExprKind::Literal(l) => l.value & m,
        ExprKind::Ident(_) => return Err(NotConstant),
        ExprKind::Paren(e) => const_eval(e, width)?,
        ExprKind::Unary(op, e) => {
            let a = const_eval(e, width)?;
            match op {
                UnaryOp::Not => !a & m,
                UnaryOp::Neg => a.wrapping_neg() & m,
                UnaryOp::LogicalNot => (a == 0) as u64,
            }
        }
        ExprKind::Binary(op, l, r) => {
            let a = const_eval(l, width)?;
            let b = const_eval(r, width)?;
            match op {
                BinaryOp::Add => a.wrapping_add(b) & m,
                BinaryOp::Sub => a.wrapping_sub(b) & m,
                BinaryOp::And => a & b,
                BinaryOp::Or => a | b,
                BinaryOp::Xor => a ^ b,
                BinaryOp::Eq => (a == b) as u64,
                BinaryOp::Ne => (a != b) as u64,
                BinaryOp::Lt => (a < b) as u64,
                BinaryOp::Gt => (a > b) as u64,
                BinaryOp::Shl => {
                    if b >= width as u64 {
                        0
                    } else {
                        (a << b) & m
                    }
                }
                BinaryOp::Shr => {
                    if b >= width as u64 {
                        0
                    } else {
                        a >> b
                    }
                }
            }
        }
    };
    Ok(v)
}
