//! Contract records and the closed vocabularies they are drawn from.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// Declares a closed enum with a canonical lowercase token per variant.
macro_rules! token_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $token:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $token)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $token),+
                }
            }

            pub fn index(self) -> usize {
                self as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = UnknownToken;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.trim() {
                    $($token => Ok($name::$variant),)+
                    other => Err(UnknownToken {
                        kind: stringify!($name),
                        token: other.to_string(),
                    }),
                }
            }
        }
    };
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownToken {
    pub kind: &'static str,
    pub token: String,
}

impl fmt::Display for UnknownToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown {} value {:?}", self.kind, self.token)
    }
}

impl std::error::Error for UnknownToken {}

token_enum!(ContractType {
    Permanent => "permanent",
    Temporary => "temporary",
    Parasubordinate => "parasubordinate",
    Other => "other",
});

token_enum!(Sector {
    Agriculture => "agriculture",
    Industry => "industry",
    Constructions => "constructions",
    Services => "services",
});

token_enum!(Sex {
    Male => "male",
    Female => "female",
});

token_enum!(Education {
    Elementary => "elementary",
    LowerSecondary => "lower_secondary",
    UpperSecondary => "upper_secondary",
    TertiaryNonUniversity => "tertiary_non_university",
    TertiaryUniversity => "tertiary_university",
    Postgraduate => "postgraduate",
});

token_enum!(
    /// Age class at first job.
    AgeClass {
        From15To19 => "15-19",
        From20To24 => "20-24",
        From25To29 => "25-29",
        From30To44 => "30-44",
        From45 => "45+",
    }
);

token_enum!(
    /// Macro area of the country.
    Area {
        NorthWest => "north_west",
        NorthEast => "north_east",
        Center => "center",
        SouthIslands => "south_islands",
    }
);

token_enum!(Region {
    Piemonte => "piemonte",
    ValleDAosta => "valle_d_aosta",
    Lombardia => "lombardia",
    Liguria => "liguria",
    TrentinoAltoAdige => "trentino_alto_adige",
    Veneto => "veneto",
    FriuliVeneziaGiulia => "friuli_venezia_giulia",
    EmiliaRomagna => "emilia_romagna",
    Toscana => "toscana",
    Umbria => "umbria",
    Marche => "marche",
    Lazio => "lazio",
    Abruzzo => "abruzzo",
    Molise => "molise",
    Campania => "campania",
    Puglia => "puglia",
    Basilicata => "basilicata",
    Calabria => "calabria",
    Sicilia => "sicilia",
    Sardegna => "sardegna",
});

impl Region {
    pub fn area(self) -> Area {
        use Region::*;
        match self {
            Piemonte | ValleDAosta | Lombardia | Liguria => Area::NorthWest,
            TrentinoAltoAdige | Veneto | FriuliVeneziaGiulia | EmiliaRomagna => Area::NorthEast,
            Toscana | Umbria | Marche | Lazio => Area::Center,
            Abruzzo | Molise | Campania | Puglia | Basilicata | Calabria | Sicilia | Sardegna => {
                Area::SouthIslands
            }
        }
    }

    /// Southern regions and the islands.
    pub fn is_mezzogiorno(self) -> bool {
        self.area() == Area::SouthIslands
    }
}

/// One employment contract event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractRecord {
    pub worker_id: String,
    pub firm_id: String,
    pub start_date: NaiveDate,
    /// `None` while the contract is ongoing.
    pub end_date: Option<NaiveDate>,
    pub contract_type: ContractType,
    pub region: Region,
    pub sector: Sector,
    pub sex: Sex,
    pub education: Education,
    pub first_job_age: AgeClass,
    pub foreign: bool,
}

impl ContractRecord {
    pub fn profile(&self) -> CovariateProfile {
        CovariateProfile {
            sex: self.sex,
            foreign: self.foreign,
            education: self.education,
            first_job_age: self.first_job_age,
            sector: self.sector,
            area: self.region.area(),
        }
    }
}

/// Worker characteristics together with the sector and area of the last job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CovariateProfile {
    pub sex: Sex,
    pub foreign: bool,
    pub education: Education,
    pub first_job_age: AgeClass,
    pub sector: Sector,
    pub area: Area,
}

impl CovariateProfile {
    /// The category of each family this profile belongs to.
    pub fn categories(&self) -> [Covariate; 6] {
        [
            match self.sex {
                Sex::Male => Covariate::Male,
                Sex::Female => Covariate::Female,
            },
            if self.foreign {
                Covariate::Foreign
            } else {
                Covariate::Native
            },
            Covariate::from_family_index(CovariateFamily::Education, self.education.index()),
            Covariate::from_family_index(CovariateFamily::FirstJobAge, self.first_job_age.index()),
            Covariate::from_family_index(CovariateFamily::Sector, self.sector.index()),
            Covariate::from_family_index(CovariateFamily::Area, self.area.index()),
        ]
    }
}

token_enum!(
    /// A covariate category whose share is tracked per cell.
    Covariate {
        Male => "male",
        Female => "female",
        Native => "native",
        Foreign => "foreign",
        EduElementary => "edu_elementary",
        EduLowerSecondary => "edu_lower_secondary",
        EduUpperSecondary => "edu_upper_secondary",
        EduTertiaryNonUniversity => "edu_tertiary_non_university",
        EduTertiaryUniversity => "edu_tertiary_university",
        EduPostgraduate => "edu_postgraduate",
        Age15To19 => "age_15_19",
        Age20To24 => "age_20_24",
        Age25To29 => "age_25_29",
        Age30To44 => "age_30_44",
        Age45Plus => "age_45_plus",
        Agriculture => "sector_agriculture",
        Industry => "sector_industry",
        Constructions => "sector_constructions",
        Services => "sector_services",
        NorthWest => "area_north_west",
        NorthEast => "area_north_east",
        Center => "area_center",
        SouthIslands => "area_south_islands",
    }
);

pub const N_COVARIATES: usize = 23;

/// Families of mutually exclusive categories; shares within a family sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CovariateFamily {
    Sex,
    Citizenship,
    Education,
    FirstJobAge,
    Sector,
    Area,
}

impl CovariateFamily {
    pub const ALL: [CovariateFamily; 6] = [
        CovariateFamily::Sex,
        CovariateFamily::Citizenship,
        CovariateFamily::Education,
        CovariateFamily::FirstJobAge,
        CovariateFamily::Sector,
        CovariateFamily::Area,
    ];

    /// Index range of the family's members inside [`Covariate::ALL`].
    pub fn span(self) -> std::ops::Range<usize> {
        match self {
            CovariateFamily::Sex => 0..2,
            CovariateFamily::Citizenship => 2..4,
            CovariateFamily::Education => 4..10,
            CovariateFamily::FirstJobAge => 10..15,
            CovariateFamily::Sector => 15..19,
            CovariateFamily::Area => 19..23,
        }
    }

    pub fn members(self) -> &'static [Covariate] {
        &Covariate::ALL[self.span()]
    }
}

impl Covariate {
    pub fn family(self) -> CovariateFamily {
        let i = self.index();
        CovariateFamily::ALL
            .into_iter()
            .find(|f| f.span().contains(&i))
            .expect("every covariate belongs to a family")
    }

    fn from_family_index(family: CovariateFamily, i: usize) -> Covariate {
        family.members()[i]
    }

    /// Balance-test set: women, every education level, every first-job age
    /// class, foreign citizens, every sector and every area.
    pub fn balance_default() -> Vec<Covariate> {
        let mut v = vec![Covariate::Female];
        v.extend_from_slice(CovariateFamily::Education.members());
        v.extend_from_slice(CovariateFamily::FirstJobAge.members());
        v.push(Covariate::Foreign);
        v.extend_from_slice(CovariateFamily::Sector.members());
        v.extend_from_slice(CovariateFamily::Area.members());
        v
    }

    /// Regression covariates with one baseline per family left out
    /// (elementary, 15-19, agriculture, north-west).
    pub fn regression_default() -> Vec<Covariate> {
        Covariate::balance_default()
            .into_iter()
            .filter(|c| {
                !matches!(
                    c,
                    Covariate::EduElementary
                        | Covariate::Age15To19
                        | Covariate::Agriculture
                        | Covariate::NorthWest
                )
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_round_trip() {
        for r in Region::ALL {
            assert_eq!(r.as_str().parse::<Region>().unwrap(), *r);
        }
        for c in Covariate::ALL {
            assert_eq!(c.as_str().parse::<Covariate>().unwrap(), *c);
        }
        assert!("atlantis".parse::<Region>().is_err());
    }

    #[test]
    fn families_partition_covariates() {
        assert_eq!(Covariate::ALL.len(), N_COVARIATES);
        let total: usize = CovariateFamily::ALL.iter().map(|f| f.span().len()).sum();
        assert_eq!(total, N_COVARIATES);
        for c in Covariate::ALL {
            assert!(c.family().members().contains(c));
        }
        assert_eq!(Covariate::balance_default().len(), 21);
        assert_eq!(Covariate::regression_default().len(), 17);
    }

    #[test]
    fn mezzogiorno_regions() {
        let south: Vec<_> = Region::ALL.iter().filter(|r| r.is_mezzogiorno()).collect();
        assert_eq!(south.len(), 8);
        assert!(Region::Sicilia.is_mezzogiorno());
        assert!(!Region::Lazio.is_mezzogiorno());
    }
}
