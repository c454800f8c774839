use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::SubsidyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirmClass {
    Regular,
    Artisan,
    Mezzogiorno,
}

impl FirmClass {
    pub const ALL: [FirmClass; 3] = [FirmClass::Regular, FirmClass::Artisan, FirmClass::Mezzogiorno];

    pub fn as_str(self) -> &'static str {
        match self {
            FirmClass::Regular => "regular",
            FirmClass::Artisan => "artisan",
            FirmClass::Mezzogiorno => "mezzogiorno",
        }
    }
}

impl fmt::Display for FirmClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FirmClass {
    type Err = SubsidyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "regular" => Ok(FirmClass::Regular),
            "artisan" => Ok(FirmClass::Artisan),
            "mezzogiorno" => Ok(FirmClass::Mezzogiorno),
            other => Err(SubsidyError::UnknownFirmClass(other.to_string())),
        }
    }
}

/// How the targeted-scheme refund share is chosen for a hire.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FractionMode {
    /// Share taken from the hire's firm class.
    ClassSpecific,
    /// One share applied to every hire.
    Blended(f64),
}

/// Contribution rates are period averages; every field can be overridden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubsidyRates {
    pub social_security_rate: f64,
    pub work_insurance_rate: f64,
    pub law407_regular: f64,
    pub law407_artisan: f64,
    pub law407_mezzogiorno: f64,
    pub law190_fraction: f64,
    pub mode: FractionMode,
}

impl Default for SubsidyRates {
    fn default() -> Self {
        Self {
            social_security_rate: 0.298,
            work_insurance_rate: 0.029,
            law407_regular: 0.5,
            law407_artisan: 1.0,
            law407_mezzogiorno: 1.0,
            law190_fraction: 1.0,
            mode: FractionMode::ClassSpecific,
        }
    }
}

impl SubsidyRates {
    pub fn validate(&self) -> Result<(), SubsidyError> {
        let mut fields = vec![
            ("social_security_rate", self.social_security_rate),
            ("work_insurance_rate", self.work_insurance_rate),
            ("law407_regular", self.law407_regular),
            ("law407_artisan", self.law407_artisan),
            ("law407_mezzogiorno", self.law407_mezzogiorno),
            ("law190_fraction", self.law190_fraction),
        ];
        if let FractionMode::Blended(b) = self.mode {
            fields.push(("blended fraction", b));
        }
        for (name, v) in fields {
            if !(0.0..=1.0).contains(&v) {
                return Err(SubsidyError::InvalidRates(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn law407_fraction(&self, class: FirmClass) -> f64 {
        match self.mode {
            FractionMode::Blended(b) => b,
            FractionMode::ClassSpecific => match class {
                FirmClass::Regular => self.law407_regular,
                FirmClass::Artisan => self.law407_artisan,
                FirmClass::Mezzogiorno => self.law407_mezzogiorno,
            },
        }
    }
}

fn check_wage(wage: f64) -> Result<(), SubsidyError> {
    if wage > 0.0 && wage.is_finite() {
        Ok(())
    } else {
        Err(SubsidyError::NonPositiveWage(wage))
    }
}

/// Annual credit under the targeted scheme.
pub fn credit_407(wage: f64, class: FirmClass, rates: &SubsidyRates) -> Result<f64, SubsidyError> {
    check_wage(wage)?;
    Ok(rates.law407_fraction(class) * (rates.social_security_rate + rates.work_insurance_rate) * wage)
}

/// Annual credit under the untargeted scheme.
pub fn credit_190(wage: f64, rates: &SubsidyRates) -> Result<f64, SubsidyError> {
    check_wage(wage)?;
    Ok(rates.law190_fraction * rates.social_security_rate * wage)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_amounts() {
        let r = SubsidyRates::default();
        assert!((credit_407(10_000.0, FirmClass::Regular, &r).unwrap() - 1635.0).abs() < 1e-9);
        assert!((credit_407(10_000.0, FirmClass::Mezzogiorno, &r).unwrap() - 3270.0).abs() < 1e-9);
        assert!((credit_407(10_000.0, FirmClass::Artisan, &r).unwrap() - 3270.0).abs() < 1e-9);
        assert!((credit_190(10_000.0, &r).unwrap() - 2980.0).abs() < 1e-9);
    }

    #[test]
    fn bad_wages() {
        let r = SubsidyRates::default();
        for w in [0.0, -1.0, f64::NAN] {
            assert!(matches!(credit_190(w, &r), Err(SubsidyError::NonPositiveWage(_))));
            assert!(matches!(
                credit_407(w, FirmClass::Regular, &r),
                Err(SubsidyError::NonPositiveWage(_))
            ));
        }
    }

    #[test]
    fn class_parsing() {
        assert_eq!(" Artisan ".parse::<FirmClass>().unwrap(), FirmClass::Artisan);
        assert!(matches!("north".parse::<FirmClass>(), Err(SubsidyError::UnknownFirmClass(_))));
    }

    #[test]
    fn rate_validation() {
        assert!(SubsidyRates::default().validate().is_ok());
        let r = SubsidyRates { work_insurance_rate: 1.2, ..Default::default() };
        assert!(r.validate().is_err());
        let r = SubsidyRates { mode: FractionMode::Blended(-0.1), ..Default::default() };
        assert!(r.validate().is_err());
    }

    #[test]
    fn blended_mode_ignores_class() {
        let r = SubsidyRates { mode: FractionMode::Blended(0.7), ..Default::default() };
        let a = credit_407(1000.0, FirmClass::Regular, &r).unwrap();
        let b = credit_407(1000.0, FirmClass::Mezzogiorno, &r).unwrap();
        assert_eq!(a, b);
        assert!((a - 0.7 * 0.327 * 1000.0).abs() < 1e-9);
    }
}
