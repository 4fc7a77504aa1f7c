use super::*;
use num_bigint::BigUint;
use num_traits::{One, Zero};
use proptest::prelude::*;

const LOG10_2_200: &str = "30102999566398119521373889472449302676818988146210854131042746112710818927442450948692725211818617204068447719143099537909476788113352350599969233370469557506450296425419340266181973431160294350118390";
const LOG10_3_60: &str = "477121254719662437295027903255115309200128864190695864829866";

/// Independent reference: ln 2 = Σ 1/(k·2^k), ln 10 = 3·ln 2 + Σ 5^−k/k.
fn reference_log10_2(bits: u32) -> BigUint {
    let one = BigUint::one() << (bits + 32);
    let mut ln2 = BigUint::zero();
    let mut k = 1u32;
    loop {
        let t = &one >> k;
        let t = t / BigUint::from(k);
        if t.is_zero() {
            break;
        }
        ln2 += t;
        k += 1;
    }
    let mut ln54 = BigUint::zero();
    let mut p = one.clone();
    let mut k = 1u32;
    loop {
        p /= BigUint::from(5u8);
        let t = &p / BigUint::from(k);
        if t.is_zero() {
            break;
        }
        ln54 += t;
        k += 1;
    }
    let ln10 = &ln2 * BigUint::from(3u8) + ln54;
    (ln2 << bits) / ln10
}

fn decimal_to_words(digits: &str, limbs: usize) -> Vec<u64> {
    let num = BigUint::parse_bytes(digits.as_bytes(), 10).unwrap();
    let den = BigUint::from(10u8).pow(digits.len() as u32);
    let scaled = (num << (64 * limbs)) / den;
    let mut w: Vec<u64> = scaled.iter_u64_digits().collect();
    w.resize(limbs, 0);
    w.reverse();
    w
}

fn as_biguint(words: &[u64]) -> BigUint {
    words
        .iter()
        .fold(BigUint::zero(), |acc, &w| (acc << 64u32) + BigUint::from(w))
}

fn assert_within(f: &CertifiedFraction, reference: &BigUint) {
    let v = as_biguint(f.words());
    let diff = if &v > reference {
        &v - reference
    } else {
        reference - &v
    };
    // reference is truncated too, allow one extra unit
    assert!(
        diff <= BigUint::from(f.err_ulps() + 1),
        "value off by {diff}, err {}",
        f.err_ulps()
    );
}

#[test]
fn log10_2_matches_reference_series_and_decimal_expansion() {
    for limbs in [3usize, 6, 10] {
        let c = certified_constant(Constant::Log10Two, limbs).unwrap();
        assert_eq!(c.int, 0);
        assert!(c.frac.err_log2().unwrap() <= -(64 * limbs as i64 - 8));
        assert_within(&c.frac, &reference_log10_2(64 * limbs as u32));
        if limbs <= 10 {
            let dec = decimal_to_words(LOG10_2_200, limbs);
            assert_within(&c.frac, &as_biguint(&dec));
        }
    }
    let c3 = certified_constant(Constant::Log10Two, 3).unwrap();
    assert!(c3.frac.err_log2().unwrap() <= -184);
    assert!((c3.to_f64() - std::f64::consts::LOG10_2).abs() < 1e-15);
}

#[test]
fn log10_2_below_half_and_precision_scaling() {
    for limbs in MIN_LIMBS..=12 {
        let c = certified_constant(Constant::Log10Two, limbs).unwrap();
        assert!(c.frac.words()[0] < 1 << 63);
    }
    let e3 = certified_constant(Constant::Log10Two, 3)
        .unwrap()
        .frac
        .err_log2()
        .unwrap();
    let e6 = certified_constant(Constant::Log10Two, 6)
        .unwrap()
        .frac
        .err_log2()
        .unwrap();
    assert!(e6 <= e3 - 150);
}

#[test]
fn ln_constants() {
    let ln10 = certified_constant(Constant::LnTen, 3).unwrap();
    assert_eq!(ln10.int, 2);
    assert!((ln10.frac.to_f64() - 0.302_585_092_994_045_7).abs() < 1e-15);
    let ln2 = certified_constant(Constant::LnTwo, 3).unwrap();
    assert!((ln2.to_f64() - std::f64::consts::LN_2).abs() < 1e-16);
    assert!("log10_2".parse::<Constant>().is_ok());
    assert!(matches!(
        "pi".parse::<Constant>(),
        Err(KernelError::InvalidArgument(_))
    ));
    assert!(certified_constant(Constant::LnTwo, 2).is_err());
}

#[test]
fn frac_log10_int_cases() {
    let ten = frac_log10_int(10, 3).unwrap();
    assert_eq!(ten.int, 1);
    assert!(ten.is_exact());
    let two = frac_log10_int(2, 3).unwrap();
    let c = certified_constant(Constant::Log10Two, 3).unwrap();
    let diff = as_biguint(two.frac.words()).max(as_biguint(c.frac.words()))
        - as_biguint(two.frac.words()).min(as_biguint(c.frac.words()));
    assert!(diff <= BigUint::from(two.err_ulps() + c.err_ulps()));
    let three = frac_log10_int(3, 3).unwrap();
    assert_within(&three.frac, &as_biguint(&decimal_to_words(LOG10_3_60, 3)));
    assert!(three.frac.err_log2().unwrap() <= -(64 * 3 - 16));
    assert!(frac_log10_int(1, 3).is_err());
}

#[test]
fn frac_mul_int_examples() {
    let alpha = certified_constant(Constant::Log10Two, 3).unwrap().frac;
    let one = frac_mul_int(&alpha, 1).unwrap();
    assert_eq!(one, alpha);
    let b = DigitBoundaries::new(10, 3).unwrap();
    // 2^10 = 1024
    let f10 = frac_mul_int(&alpha, 10).unwrap();
    assert!((f10.to_f64() - 0.010_299_956_639_812).abs() < 1e-12);
    assert_eq!(decide_digit(&f10, &b), Decision::Digit(Digit(1)));
    // 2^29 = 536870912
    let f29 = frac_mul_int(&alpha, 29).unwrap();
    assert_eq!(decide_digit(&f29, &b), Decision::Digit(Digit(5)));
    assert!(f29.err_ulps() <= 29 * alpha.err_ulps());
    assert!(matches!(
        frac_mul_int(&alpha, (1 << 48) + 1),
        Err(KernelError::OutOfRange { .. })
    ));
    assert!(frac_mul_int(&alpha, 1 << 48).is_ok());
}

#[test]
fn decide_digit_examples() {
    let b = DigitBoundaries::new(10, 3).unwrap();
    assert_eq!(
        decide_digit(&CertifiedFraction::zero(3), &b),
        Decision::Digit(Digit(1))
    );
    let alpha = certified_constant(Constant::Log10Two, 3).unwrap().frac;
    let f11 = frac_mul_int(&alpha, 11).unwrap();
    assert_eq!(decide_digit(&f11, &b), Decision::Digit(Digit(2)));
    // Large error straddling log10 2.
    let wide = alpha.clone().with_extra_err(1u128 << 100);
    assert_eq!(decide_digit(&wide, &b), Decision::NeedsEscalation);
    // 2^1 = 2 sits exactly on the boundary.
    assert_eq!(decide_digit(&alpha, &b), Decision::NeedsEscalation);
    // Just below 1.0 with error crossing 1 wraps.
    let near_one = CertifiedFraction::from_words(&[u64::MAX, u64::MAX, u64::MAX - 3], 10).unwrap();
    assert_eq!(decide_digit(&near_one, &b), Decision::NeedsEscalation);
    let near_one_ok =
        CertifiedFraction::from_words(&[u64::MAX, u64::MAX, u64::MAX - 30], 10).unwrap();
    assert_eq!(decide_digit(&near_one_ok, &b), Decision::Digit(Digit(9)));
}

#[test]
fn boundaries_are_increasing_and_exact_at_ends() {
    for base in [3u32, 10, 16] {
        let b = DigitBoundaries::new(base, 3).unwrap();
        assert!(b.bound(1).is_exact() && b.bound(1).int == 0);
        assert!(b.bound(base).is_exact() && b.bound(base).int == 1);
        for d in 1..base {
            assert!(b.bound(d).to_f64() < b.bound(d + 1).to_f64());
            assert!(b.bound(d).err_ulps() <= 1 << 16);
        }
    }
    assert!(DigitBoundaries::new(17, 3).is_err());
    assert!(DigitBoundaries::new(10, 2).is_err());
}

#[test]
fn digit_bounds() {
    assert!(Digit::new(0, 10).is_err());
    assert!(Digit::new(10, 10).is_err());
    assert_eq!(Digit::new(9, 10).unwrap().get(), 9);
}

#[test]
fn chained_additions_respect_closed_form_error() {
    let alpha = certified_constant(Constant::Log10Two, 3).unwrap().frac;
    let mut acc = CertifiedFraction::zero(3);
    for k in 1..=5000u128 {
        acc.add_assign(&alpha);
        assert!(acc.err_ulps() <= k << 16);
    }
    assert_eq!(acc, frac_mul_int(&alpha, 5000).unwrap());
}

#[test]
fn ln_ratio_step_matches_direct_logs() {
    for &(gap, x) in &[
        (1u64, 1u64),
        (1, 7),
        (2, 3),
        (4, 101),
        (1, 1_000_000_007),
        (30, 999_999_937),
    ] {
        let step = ln_ratio_step(gap, x, 3).unwrap();
        let mut lo = ln_of_int(x, 3).unwrap();
        lo.add_assign(&CertifiedReal { int: 0, frac: step })
            .unwrap();
        let hi = ln_of_int(x + gap, 3).unwrap();
        assert_eq!(lo.int, hi.int);
        let a = as_biguint(lo.frac.words());
        let b = as_biguint(hi.frac.words());
        let diff = if a > b { a - b } else { b - a };
        assert!(
            diff <= BigUint::from(lo.err_ulps() + hi.err_ulps()),
            "gap={gap} x={x}"
        );
    }
    assert!(ln_ratio_step(0, 5, 3).is_err());
    assert!(ln_ratio_step(6, 5, 3).is_err());
}

#[test]
fn real_mul_bounds_hold() {
    let ln10 = certified_constant(Constant::LnTen, 4).unwrap();
    let inv = inverse_ln_base(10, 4).unwrap();
    let one = ln10.mul(&inv).unwrap();
    // ln 10 · (1/ln 10) = 1 within the stated error
    let words = one.frac.words();
    let err = one.err_ulps();
    let near_one = (one.int == 0
        && as_biguint(words) + BigUint::from(err) >= (BigUint::one() << 256u32))
        || (one.int == 1 && as_biguint(words) <= BigUint::from(err));
    assert!(near_one, "{one}");
    let zero = CertifiedReal::zero(4);
    assert!(zero.mul(&inv).unwrap().is_exact());
}

#[test]
fn escalation_ladder() {
    assert_eq!(escalate(3), Some(6));
    assert_eq!(escalate(24), Some(32));
    assert_eq!(escalate(32), None);
}

proptest! {
    #[test]
    fn frac_mul_int_is_deterministic_and_consistent(m in 1u64..1_000_000, k in 1u64..1000) {
        let alpha = certified_constant(Constant::Log10Two, 3).unwrap().frac;
        let a = frac_mul_int(&alpha, m).unwrap();
        let b = frac_mul_int(&alpha, m).unwrap();
        prop_assert_eq!(&a, &b);
        // {(m·k)α} = {k·{mα}}
        let direct = frac_mul_int(&alpha, m * k).unwrap();
        let nested = frac_mul_int(&a, k).unwrap();
        prop_assert_eq!(direct, nested);
    }

    #[test]
    fn decided_digit_agrees_with_double_estimate(m in 4u64..1_000_000) {
        let alpha = certified_constant(Constant::Log10Two, 3).unwrap().frac;
        let b = DigitBoundaries::new(10, 3).unwrap();
        let f = frac_mul_int(&alpha, m).unwrap();
        if let Decision::Digit(d) = decide_digit(&f, &b) {
            let approx = 10f64.powf(f.to_f64());
            let est = approx.floor() as u8;
            // only trust the double estimate away from boundaries
            if (approx - approx.round()).abs() > 1e-6 {
                prop_assert_eq!(d.get(), est);
            }
        }
    }

    #[test]
    fn shortcut_agrees_with_full_comparison(
        base in prop::sample::select(vec![3u32, 5, 7, 10, 12, 16]),
        limbs in prop::sample::select(vec![3usize, 4, 6]),
        d in 1u32..16,
        offset in -5i64..5,
        low in any::<u64>(),
        err_shift in 0u32..128,
    ) {
        let b = DigitBoundaries::new(base, limbs).unwrap();
        let d = 1 + d % (base - 1);
        // start near the lower edge of cell d and perturb the top word
        let mut words: Vec<u64> = b.bound(d).frac.words().to_vec();
        words[0] = words[0].wrapping_add(offset as u64);
        words[limbs - 1] = low;
        let err = (1u128 << err_shift) - 1;
        let f = CertifiedFraction::from_words(&words, err).unwrap();
        prop_assert_eq!(decide_digit(&f, &b), decide_full(&f, &b));
    }
}
