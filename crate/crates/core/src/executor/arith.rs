//! Fixed-width integer semantics over canonical big integers.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::frontend::{BinOp, ScalarType, UnOp};

/// Reduces `raw` into the value range of `ty` by two's-complement truncation.
pub fn wrap(raw: &BigInt, ty: ScalarType) -> BigInt {
    if ty == ScalarType::Bool {
        return BigInt::from(u8::from(!raw.is_zero()));
    }
    let w = ty.bits();
    let mask = (BigInt::one() << w) - 1;
    let low = raw & &mask;
    if ty.is_signed() && low.bit(u64::from(w) - 1) {
        low - (BigInt::one() << w)
    } else {
        low
    }
}

pub fn in_range(v: &BigInt, ty: ScalarType) -> bool {
    let (lo, hi) = ty.bounds();
    &lo <= v && v <= &hi
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArithOutcome {
    Value(BigInt),
    /// Result left the type's range; `raw` is the unbounded result.
    Wrapped {
        raw: BigInt,
        reduced: BigInt,
    },
    DivisionByZero,
}

impl ArithOutcome {
    fn from_raw(raw: BigInt, ty: ScalarType) -> ArithOutcome {
        if in_range(&raw, ty) {
            ArithOutcome::Value(raw)
        } else {
            let reduced = wrap(&raw, ty);
            ArithOutcome::Wrapped { raw, reduced }
        }
    }

    /// The value the program observes, `None` on division by zero.
    pub fn value(&self) -> Option<&BigInt> {
        match self {
            ArithOutcome::Value(v) | ArithOutcome::Wrapped { reduced: v, .. } => Some(v),
            ArithOutcome::DivisionByZero => None,
        }
    }
}

fn truth(b: bool) -> BigInt {
    BigInt::from(u8::from(b))
}

/// Evaluates `a op b` at type `ty`. Operands are taken as mathematical
/// integers; comparisons and logical operators yield 0 or 1.
pub fn binary(op: BinOp, a: &BigInt, b: &BigInt, ty: ScalarType) -> ArithOutcome {
    let raw = match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        // Truncating division and remainder with the dividend's sign.
        BinOp::Div | BinOp::Mod if b.is_zero() => return ArithOutcome::DivisionByZero,
        BinOp::Div => a / b,
        BinOp::Mod => a % b,
        BinOp::Lt => return ArithOutcome::Value(truth(a < b)),
        BinOp::Le => return ArithOutcome::Value(truth(a <= b)),
        BinOp::Gt => return ArithOutcome::Value(truth(a > b)),
        BinOp::Ge => return ArithOutcome::Value(truth(a >= b)),
        BinOp::Eq => return ArithOutcome::Value(truth(a == b)),
        BinOp::Ne => return ArithOutcome::Value(truth(a != b)),
        BinOp::And => return ArithOutcome::Value(truth(!a.is_zero() && !b.is_zero())),
        BinOp::Or => return ArithOutcome::Value(truth(!a.is_zero() || !b.is_zero())),
    };
    ArithOutcome::from_raw(raw, ty)
}

pub fn unary(op: UnOp, a: &BigInt, ty: ScalarType) -> ArithOutcome {
    match op {
        UnOp::Not => ArithOutcome::Value(truth(a.is_zero())),
        UnOp::Neg => ArithOutcome::from_raw(-a, ty),
    }
}

#[cfg(test)]
mod tests {
    use num_integer::Integer;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use num_traits::Signed;

    use super::*;

    /// Reduction by floored modulus, independent of the masking in `wrap`.
    fn oracle_reduce(raw: &BigInt, ty: ScalarType) -> BigInt {
        let m = BigInt::from(2).pow(u32::from(ty.bits()));
        if ty.is_signed() {
            let half = &m / 2;
            let shifted: BigInt = raw + &half;
            shifted.mod_floor(&m) - half
        } else {
            raw.mod_floor(&m)
        }
    }

    fn oracle(op: BinOp, a: &BigInt, b: &BigInt, ty: ScalarType) -> Option<BigInt> {
        let raw = match op {
            BinOp::Add => a + b,
            BinOp::Sub => a - b,
            BinOp::Mul => a * b,
            BinOp::Div | BinOp::Mod if b.is_zero() => return None,
            BinOp::Div => {
                let q = a.abs() / b.abs();
                if (a.is_negative()) != (b.is_negative()) {
                    -q
                } else {
                    q
                }
            }
            BinOp::Mod => {
                let r = a.abs() % b.abs();
                if a.is_negative() {
                    -r
                } else {
                    r
                }
            }
            _ => unreachable!(),
        };
        Some(oracle_reduce(&raw, ty))
    }

    fn random_in(rng: &mut ChaCha8Rng, ty: ScalarType) -> BigInt {
        let (lo, hi) = ty.bounds();
        // Bias a third of the draws towards the extremes.
        match rng.gen_range(0..6) {
            0 => lo + rng.gen_range(0..3),
            1 => hi - rng.gen_range(0..3),
            2 => BigInt::from(rng.gen_range(-2i64..3)).max(lo).min(hi),
            _ => {
                use num_bigint::RandBigInt;
                rng.gen_bigint_range(&lo, &(hi + 1))
            }
        }
    }

    #[test]
    fn ten_thousand_cases_match_unbounded_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let ops = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Mod];
        for _ in 0..10_000 {
            let w = 8 * rng.gen_range(1..=32u16);
            let ty = if rng.gen_bool(0.5) {
                ScalarType::Uint(w)
            } else {
                ScalarType::Int(w)
            };
            let op = ops[rng.gen_range(0..ops.len())];
            let a = random_in(&mut rng, ty);
            let b = random_in(&mut rng, ty);
            let got = binary(op, &a, &b, ty);
            assert_eq!(
                got.value().cloned(),
                oracle(op, &a, &b, ty),
                "{a} {} {b} at {ty}",
                op.symbol()
            );
            if let ArithOutcome::Wrapped { raw, .. } = &got {
                assert!(!in_range(raw, ty));
            }
        }
    }

    #[test]
    fn uint8_wraps() {
        let t = ScalarType::Uint(8);
        assert_eq!(
            binary(BinOp::Add, &BigInt::from(255), &BigInt::from(1), t),
            ArithOutcome::Wrapped {
                raw: BigInt::from(256),
                reduced: BigInt::from(0)
            }
        );
        assert_eq!(
            binary(BinOp::Sub, &BigInt::from(0), &BigInt::from(1), t).value(),
            Some(&BigInt::from(255))
        );
    }

    #[test]
    fn signed_edge_cases() {
        let t = ScalarType::Int(8);
        assert_eq!(
            binary(BinOp::Div, &BigInt::from(-128), &BigInt::from(-1), t).value(),
            Some(&BigInt::from(-128))
        );
        assert_eq!(
            binary(BinOp::Div, &BigInt::from(-7), &BigInt::from(2), t).value(),
            Some(&BigInt::from(-3))
        );
        assert_eq!(
            binary(BinOp::Mod, &BigInt::from(-7), &BigInt::from(2), t).value(),
            Some(&BigInt::from(-1))
        );
        assert_eq!(
            unary(UnOp::Neg, &BigInt::from(-128), t).value(),
            Some(&BigInt::from(-128))
        );
    }

    #[test]
    fn division_by_zero() {
        for ty in [ScalarType::Uint(256), ScalarType::Int(16)] {
            assert_eq!(
                binary(BinOp::Div, &BigInt::from(5), &BigInt::zero(), ty),
                ArithOutcome::DivisionByZero
            );
            assert_eq!(
                binary(BinOp::Mod, &BigInt::from(5), &BigInt::zero(), ty),
                ArithOutcome::DivisionByZero
            );
        }
    }

    proptest! {
        #[test]
        fn matches_native_u64(a: u64, b: u64) {
            let t = ScalarType::Uint(64);
            let (x, y) = (BigInt::from(a), BigInt::from(b));
            prop_assert_eq!(binary(BinOp::Add, &x, &y, t).value().cloned(), Some(BigInt::from(a.wrapping_add(b))));
            prop_assert_eq!(binary(BinOp::Sub, &x, &y, t).value().cloned(), Some(BigInt::from(a.wrapping_sub(b))));
            prop_assert_eq!(binary(BinOp::Mul, &x, &y, t).value().cloned(), Some(BigInt::from(a.wrapping_mul(b))));
        }

        #[test]
        fn matches_native_i32(a: i32, b: i32) {
            let t = ScalarType::Int(32);
            let (x, y) = (BigInt::from(a), BigInt::from(b));
            prop_assert_eq!(binary(BinOp::Add, &x, &y, t).value().cloned(), Some(BigInt::from(a.wrapping_add(b))));
            prop_assert_eq!(binary(BinOp::Mul, &x, &y, t).value().cloned(), Some(BigInt::from(a.wrapping_mul(b))));
            if b != 0 {
                prop_assert_eq!(binary(BinOp::Div, &x, &y, t).value().cloned(), Some(BigInt::from(a.wrapping_div(b))));
                prop_assert_eq!(binary(BinOp::Mod, &x, &y, t).value().cloned(), Some(BigInt::from(a.wrapping_rem(b))));
            }
        }

        #[test]
        fn wrap_lands_in_range(raw in any::<i128>(), w in 1u16..=16) {
            for ty in [ScalarType::Uint(8 * w), ScalarType::Int(8 * w)] {
                let r = wrap(&BigInt::from(raw), ty);
                prop_assert!(in_range(&r, ty));
                prop_assert_eq!(r, oracle_reduce(&BigInt::from(raw), ty));
            }
        }
    }
}
