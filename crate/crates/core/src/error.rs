use thiserror::Error;

/// Broad class of an error, used by the HTTP layer to pick a status code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    NotFound,
    Conflict,
    Internal,
}

macro_rules! error_enum {
    ($( $kind:ident => [ $( $(#[$doc:meta])* $variant:ident ),* $(,)? ] ),* $(,)?) => {
        #[derive(Debug, Clone, PartialEq, Error)]
        pub enum Error {
            $($(
                $(#[$doc])*
                #[error("{0}")]
                $variant(String),
            )*)*
        }

        impl Error {
            /// Stable machine-readable name of the variant.
            pub fn code(&self) -> &'static str {
                match self {
                    $($(Error::$variant(_) => stringify!($variant),)*)*
                }
            }

            pub fn kind(&self) -> ErrorKind {
                match self {
                    $($(Error::$variant(_) => ErrorKind::$kind,)*)*
                }
            }

            pub fn detail(&self) -> &str {
                match self {
                    $($(Error::$variant(d) => d,)*)*
                }
            }
        }
    };
}

error_enum! {
    Validation => [
        MalformedXml,
        UnknownElement,
        UndeclaredVariable,
        DuplicateEquationId,
        DuplicateVariable,
        InvalidDescriptor,
        InvalidStructure,
        NoPerfectMatching,
        RoleConflict,
        EmptyFdSet,
        KeyViolation,
        UnknownSymbol,
        MissingValue,
        UnknownAttribute,
        InvalidCsv,
        InvalidValue,
        NonPositiveWeight,
        NoTrials,
        UnfactorizedTrial,
        UnknownAssignment,
        NonPositiveSigma,
        NonPositivePrior,
        MissingPrediction,
        EmptyObservationSet,
        InvalidModel,
        NonFiniteState,
    ],
    NotFound => [
        UnknownRelation,
        UnknownPhenomenon,
        UnknownHypothesis,
        NoProject,
    ],
    Conflict => [
        DuplicateRelation,
        DuplicatePhenomenon,
        DuplicateHypothesis,
        StageViolation,
        NotUIntroduced,
        ProjectExists,
    ],
    Internal => [
        Io,
        CorruptProject,
    ],
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
