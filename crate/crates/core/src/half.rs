use std::fmt;

/// A half-integer stored as twice its value, used for `j` and `m` labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct Half(i32);

impl Half {
    pub const ZERO: Half = Half(0);

    pub const fn from_twice(twice: i32) -> Self {
        Half(twice)
    }

    pub fn from_int(n: i32) -> Self {
        Half(2 * n)
    }

    /// Nearest half-integer to `x`; `None` if `x` is not within 1e-9 of one.
    pub fn from_f64(x: f64) -> Option<Self> {
        let t = (2.0 * x).round();
        ((2.0 * x - t).abs() < 1e-9).then_some(Half(t as i32))
    }

    pub const fn twice(self) -> i32 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn is_integer(self) -> bool {
        self.0 % 2 == 0
    }

    /// Multiplet dimension `2j + 1`.
    pub fn dim(self) -> usize {
        (self.0 + 1) as usize
    }
}

impl std::ops::Add for Half {
    type Output = Half;
    fn add(self, o: Half) -> Half {
        Half(self.0 + o.0)
    }
}

impl std::ops::Sub for Half {
    type Output = Half;
    fn sub(self, o: Half) -> Half {
        Half(self.0 - o.0)
    }
}

impl std::ops::Neg for Half {
    type Output = Half;
    fn neg(self) -> Half {
        Half(-self.0)
    }
}

impl fmt::Display for Half {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 % 2 == 0 {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}/2", self.0)
        }
    }
}
