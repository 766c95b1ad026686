use std::error::Error as _;
use std::fmt;
use std::time::Duration;

use reqwest::header::{HeaderMap, HeaderName, HeaderValue, CONTENT_TYPE, COOKIE};
use url::Url;

pub const MAX_REDIRECTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkErrorKind {
    Dns,
    Connect,
    Timeout,
    Tls,
    Other,
}

impl fmt::Display for NetworkErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Dns => "dns",
            Self::Connect => "connect",
            Self::Timeout => "timeout",
            Self::Tls => "tls",
            Self::Other => "other",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FetchError {
    #[error("only http and https URLs can be fetched, got {0}")]
    UnsupportedScheme(String),
    #[error("network error ({kind}): {message}")]
    Network { kind: NetworkErrorKind, message: String },
    #[error("more than {MAX_REDIRECTS} redirects")]
    TooManyRedirects,
    #[error("content type {0:?} is not HTML")]
    NonHtmlContent(String),
    #[error("invalid header: {0}")]
    InvalidHeader(String),
}

/// Extra request headers, typically a session cookie for pages behind a login.
#[derive(Debug, Clone, Default)]
pub struct FetchAuth {
    headers: HeaderMap,
}

impl FetchAuth {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_header(mut self, name: &str, value: &str) -> Result<Self, FetchError> {
        let name = HeaderName::from_bytes(name.trim().as_bytes())
            .map_err(|_| FetchError::InvalidHeader(format!("bad header name {name:?}")))?;
        let value = HeaderValue::from_str(value.trim())
            .map_err(|_| FetchError::InvalidHeader(format!("bad value for {name}")))?;
        self.headers.append(name, value);
        Ok(self)
    }

    pub fn with_cookie(self, cookie: &str) -> Result<Self, FetchError> {
        self.with_header(COOKIE.as_str(), cookie)
    }

    /// Parses a `Name: value` line.
    pub fn with_header_line(self, line: &str) -> Result<Self, FetchError> {
        let (name, value) = line
            .split_once(':')
            .ok_or_else(|| FetchError::InvalidHeader(format!("expected `Name: value`, got {line:?}")))?;
        self.with_header(name, value)
    }

    pub fn headers(&self) -> &HeaderMap {
        &self.headers
    }
}

#[derive(Debug, Clone)]
pub struct FetchedPage {
    pub status: u16,
    pub body: Vec<u8>,
    pub content_type: String,
    /// URL after redirects.
    pub final_url: Url,
}

impl FetchedPage {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }
}

fn is_html(content_type: &str) -> bool {
    let mime = content_type.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
    // servers that send no type at all are given the benefit of the doubt
    mime.is_empty() || mime == "text/html" || mime == "application/xhtml+xml"
}

fn classify(err: &reqwest::Error) -> FetchError {
    if err.is_redirect() {
        return FetchError::TooManyRedirects;
    }
    let mut chain = err.to_string().to_ascii_lowercase();
    let mut source = err.source();
    while let Some(s) = source {
        chain.push_str(" | ");
        chain.push_str(&s.to_string().to_ascii_lowercase());
        source = s.source();
    }
    let kind = if err.is_timeout() || chain.contains("timed out") {
        NetworkErrorKind::Timeout
    } else if chain.contains("dns") || chain.contains("lookup") || chain.contains("resolve") {
        NetworkErrorKind::Dns
    } else if chain.contains("certificate") || chain.contains("tls") || chain.contains("handshake") {
        NetworkErrorKind::Tls
    } else if err.is_connect() {
        NetworkErrorKind::Connect
    } else {
        NetworkErrorKind::Other
    };
    FetchError::Network { kind, message: chain }
}

/// HTTP client for page fetching. Follows up to [`MAX_REDIRECTS`] redirects.
#[derive(Clone)]
pub struct Fetcher {
    client: reqwest::Client,
    timeout: Duration,
}

impl Fetcher {
    pub fn new(timeout: Duration) -> Self {
        let client = reqwest::Client::builder()
            .redirect(reqwest::redirect::Policy::limited(MAX_REDIRECTS))
            .user_agent(concat!("edubot-scraper/", env!("CARGO_PKG_VERSION")))
            .build()
            .expect("static client configuration");
        Self { client, timeout }
    }

    /// One GET. Non-2xx statuses are returned, not raised. With `force`,
    /// non-HTML bodies are accepted.
    pub async fn fetch_page(&self, url: &Url, auth: &FetchAuth, force: bool) -> Result<FetchedPage, FetchError> {
        if !matches!(url.scheme(), "http" | "https") {
            return Err(FetchError::UnsupportedScheme(url.scheme().to_owned()));
        }
        let response = self
            .client
            .get(url.clone())
            .headers(auth.headers().clone())
            .timeout(self.timeout)
            .send()
            .await
            .map_err(|e| classify(&e))?;

        let status = response.status().as_u16();
        let final_url = response.url().clone();
        let content_type = response
            .headers()
            .get(CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .unwrap_or_default()
            .to_owned();
        if (200..300).contains(&status) && !force && !is_html(&content_type) {
            return Err(FetchError::NonHtmlContent(content_type));
        }
        let body = response.bytes().await.map_err(|e| classify(&e))?.to_vec();
        Ok(FetchedPage {
            status,
            body,
            content_type,
            final_url,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn html_content_types() {
        assert!(is_html("text/html"));
        assert!(is_html("text/html; charset=utf-8"));
        assert!(is_html("Application/XHTML+XML"));
        assert!(is_html(""));
        assert!(!is_html("application/pdf"));
        assert!(!is_html("text/plain"));
    }

    #[test]
    fn header_names_must_be_tokens() {
        assert!(FetchAuth::new().with_header("X-Course", "42").is_ok());
        assert!(matches!(
            FetchAuth::new().with_header("bad name", "x"),
            Err(FetchError::InvalidHeader(_))
        ));
        assert!(FetchAuth::new().with_header_line("no colon here").is_err());
        let auth = FetchAuth::new().with_cookie("session=abc").unwrap();
        assert_eq!(auth.headers()[COOKIE], "session=abc");
    }

    #[tokio::test]
    async fn non_http_scheme_is_refused() {
        let fetcher = Fetcher::new(Duration::from_secs(1));
        let url = Url::parse("ftp://example.com/x").unwrap();
        assert!(matches!(
            fetcher.fetch_page(&url, &FetchAuth::new(), false).await,
            Err(FetchError::UnsupportedScheme(_))
        ));
    }

    #[tokio::test]
    async fn unknown_host_is_a_dns_error() {
        let fetcher = Fetcher::new(Duration::from_secs(5));
        let url = Url::parse("http://no-such-host.invalid/").unwrap();
        match fetcher.fetch_page(&url, &FetchAuth::new(), false).await {
            Err(FetchError::Network { kind, .. }) => assert_eq!(kind, NetworkErrorKind::Dns),
            other => panic!("expected dns error, got {other:?}"),
        }
    }
}
