use thiserror::Error;

pub type Result<T, E = AxeError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AxeError {
    #[error("input is empty or whitespace only")]
    EmptyInput,
    #[error("no node with id {0}")]
    UnknownNode(usize),
    #[error("node {0} is not an element")]
    NotAnElement(usize),
    #[error("invalid xpath: {0}")]
    InvalidXPath(String),
    #[error("xpath does not resolve: {0}")]
    XPathNotFound(String),
    #[error("chunk budget {0} is below the minimum of 64 tokens")]
    BudgetTooSmall(usize),
    #[error("template `{template}` lacks the {placeholder} placeholder")]
    MissingPlaceholder {
        template: &'static str,
        placeholder: &'static str,
    },
    #[error("query must not be empty")]
    EmptyQuery,
    #[error("could not recover {0} from model output")]
    Unparseable(&'static str),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("model client error: {0}")]
    Client(#[from] ClientError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<std::io::Error> for AxeError {
    fn from(e: std::io::Error) -> Self {
        AxeError::Io(e.to_string())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClientError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed completion response: {0}")]
    Protocol(String),
    #[error("no scripted response for prompt {0}")]
    NoFixture(String),
    #[error("API key variable `{0}` is not set")]
    MissingApiKey(String),
}

impl ClientError {
    /// Whether another attempt might succeed.
    pub fn is_transient(&self) -> bool {
        match self {
            ClientError::Transport(_) => true,
            ClientError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}
