//! JSON encoding for exact integers: a plain number when it fits in `u64`,
//! otherwise a decimal string. Both forms are accepted on input.

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::de::{self, Deserializer, Visitor};
use serde::Serializer;

pub fn serialize<S: Serializer>(n: &BigUint, s: S) -> Result<S::Ok, S::Error> {
    match n.to_u64() {
        Some(v) => s.serialize_u64(v),
        None => s.serialize_str(&n.to_str_radix(10)),
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
    struct V;

    impl Visitor<'_> for V {
        type Value = BigUint;

        fn expecting(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
            f.write_str("a non-negative integer or a decimal string")
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<BigUint, E> {
            Ok(BigUint::from(v))
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<BigUint, E> {
            u64::try_from(v)
                .map(BigUint::from)
                .map_err(|_| E::custom(format!("negative integer {v}")))
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<BigUint, E> {
            v.parse::<BigUint>()
                .map_err(|_| E::custom(format!("invalid integer string `{v}`")))
        }
    }

    d.deserialize_any(V)
}

#[cfg(test)]
mod tests {
    use num_bigint::BigUint;
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct W(#[serde(with = "super")] BigUint);

    #[test]
    fn small_and_large() {
        assert_eq!(
            serde_json::to_string(&W(BigUint::from(42u32))).unwrap(),
            "42"
        );
        let big = BigUint::from(u64::MAX) * 10u32;
        let s = serde_json::to_string(&W(big.clone())).unwrap();
        assert_eq!(s, "\"184467440737095516150\"");
        assert_eq!(serde_json::from_str::<W>(&s).unwrap(), W(big));
        assert_eq!(
            serde_json::from_str::<W>("7").unwrap(),
            W(BigUint::from(7u8))
        );
        assert!(serde_json::from_str::<W>("-3").is_err());
        assert!(serde_json::from_str::<W>("\"x1\"").is_err());
    }
}
