use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("expected {expected} comma-separated fields, found {found}")]
    FieldCount { expected: usize, found: usize },

    #[error("unknown action token `{0}`")]
    UnknownAction(String),

    #[error("unknown direction `{0}`")]
    UnknownDirection(String),

    #[error("protocol `{0}` is not declared in the domain")]
    UnknownProtocol(String),

    #[error("malformed {field} pattern `{text}`")]
    BadPattern { field: &'static str, text: String },

    #[error("{field} value `{text}` lies outside the domain")]
    OutOfDomain { field: &'static str, text: String },

    #[error("ICMP rules only accept ANY or 0 for port fields")]
    IcmpPorts,

    #[error("line {line}: {error}")]
    Line {
        line: usize,
        error: Box<Error>,
    },

    #[error("xml: {0}")]
    Xml(String),

    #[error("policy schema: {0}")]
    Schema(String),

    #[error("default action declared more than once")]
    DuplicateDefault,

    #[error("operands are defined over different domains")]
    DomainMismatch,

    #[error("cannot compare a {0} set with a {1} set")]
    DimensionMismatch(&'static str, &'static str),

    #[error("policies use different default actions")]
    DefaultMismatch,

    #[error("domain holds {size} packets, enumeration cap is {cap}")]
    EnumerationCap { size: u128, cap: u128 },

    #[error("malformed packet `{0}`, expected `PROTO DIR SRC:SPT DST:DPT`")]
    MalformedPacket(String),

    #[error("log line is missing required key {0}")]
    MissingLogKey(&'static str),

    #[error("malformed log line: {0}")]
    MalformedLog(String),

    #[error("bad value `{value}` for log field {key}")]
    BadLogField { key: String, value: String },

    #[error("invalid framework config: {0}")]
    InvalidConfig(String),

    #[error("partition invariant violated: {0}")]
    PartitionInvariant(String),
}

impl Error {
    pub(crate) fn at_line(self, line: usize) -> Self {
        Error::Line {
            line,
            error: Box::new(self),
        }
    }
}
