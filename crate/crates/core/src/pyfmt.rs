//! Number and string formatting that matches the textual conventions LLM-facing abstractions
//! use: shortest round-trip floats that always carry a decimal point (`20.0`, `33.6`),
//! scientific notation outside `1e-4 <= |x| < 1e16`, and single-quoted string literals.

/// Shortest round-trip representation of `x`, laid out like Python's `repr(float)`.
pub fn float_repr(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_owned();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_owned();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0" } else { "0.0" }.to_owned();
    }

    // `{:e}` yields the shortest digits that round-trip, e.g. "-8.8968e5".
    let sci = format!("{:e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("LowerExp always has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();

    let body = if (-4..16).contains(&exp) {
        if exp >= 0 {
            let int_len = exp as usize + 1;
            if digits.len() <= int_len {
                format!("{}{}.0", digits, "0".repeat(int_len - digits.len()))
            } else {
                format!("{}.{}", &digits[..int_len], &digits[int_len..])
            }
        } else {
            format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
        }
    } else {
        let mant = if digits.len() == 1 { digits.clone() } else { format!("{}.{}", &digits[..1], &digits[1..]) };
        let esign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", mant, esign, exp.abs())
    };
    format!("{sign}{body}")
}

/// Rounds to `decimals` places using the correctly rounded decimal value of `x`.
pub fn round_to(x: f64, decimals: u32) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{:.*}", decimals as usize, x).parse().unwrap_or(x)
}

/// Single-quoted string literal; switches to double quotes when the text holds a single
/// quote but no double quote.
pub fn str_repr(s: &str) -> String {
    let quote = if s.contains('\'') && !s.contains('"') { '"' } else { '\'' };
    let mut out = String::with_capacity(s.len() + 2);
    out.push(quote);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if c == quote => {
                out.push('\\');
                out.push(c);
            }
            c => out.push(c),
        }
    }
    out.push(quote);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integral_values_keep_a_decimal_point() {
        assert_eq!(float_repr(20.0), "20.0");
        assert_eq!(float_repr(5184000.0), "5184000.0");
        assert_eq!(float_repr(-3.0), "-3.0");
        assert_eq!(float_repr(0.0), "0.0");
    }

    #[test]
    fn shortest_round_trip_digits() {
        assert_eq!(float_repr(889688.4000776347), "889688.4000776347");
        assert_eq!(float_repr(59591524.946000494), "59591524.946000494");
        assert_eq!(float_repr(0.1), "0.1");
        assert_eq!(float_repr(33.6), "33.6");
        assert_eq!(float_repr(0.25), "0.25");
    }

    #[test]
    fn scientific_outside_fixed_window() {
        assert_eq!(float_repr(1e16), "1e+16");
        assert_eq!(float_repr(1.5e-7), "1.5e-07");
        assert_eq!(float_repr(0.0001), "0.0001");
        assert_eq!(float_repr(9999999999999998.0), "9999999999999998.0");
        assert_eq!(float_repr(1.2345e100), "1.2345e+100");
    }

    #[test]
    fn rounding() {
        assert_eq!(float_repr(round_to(7568635.6543, 2)), "7568635.65");
        assert_eq!(float_repr(round_to(5184000.0, 2)), "5184000.0");
        assert_eq!(float_repr(round_to(45566346.4449, 2)), "45566346.44");
        // 2.675 is stored as 2.67499999..., so it rounds down
        assert_eq!(round_to(2.675, 2), 2.67);
    }

    #[test]
    fn string_literals() {
        assert_eq!(str_repr("source:1"), "'source:1'");
        assert_eq!(str_repr("it's"), "\"it's\"");
        assert_eq!(str_repr("a'\"b"), "'a\\'\"b'");
    }

    proptest::proptest! {
        #[test]
        fn repr_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            let s = float_repr(x);
            proptest::prop_assert_eq!(s.parse::<f64>().unwrap(), x);
            proptest::prop_assert!(s.contains('.') || s.contains('e'));
        }
    }
}
