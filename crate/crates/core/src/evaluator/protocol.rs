//! Line-delimited JSON worker protocol.
//!
//! One request per line:
//!
//! ```text
//! {"id":7,"spec":[{"decomposition":null,"pruning":{"structured":true,"rate":0.45}}],"arch":"vgg16"}
//! ```
//!
//! One response per line, either
//!
//! ```text
//! {"id":7,"accuracy":80.0}
//! {"id":7,"error":"message"}
//! {"id":null,"error":"message"}
//! ```
//!
//! Field order is fixed and encoding is compact. Decoding then re-encoding a
//! canonical line reproduces it byte for byte.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genotype::CompressedModelSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Request {
    pub id: u64,
    pub spec: CompressedModelSpec,
    /// Name of the architecture the spec applies to.
    pub arch: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccuracyReply {
    pub id: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorReply {
    pub id: Option<u64>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Response {
    Accuracy(AccuracyReply),
    Error(ErrorReply),
}

impl Response {
    pub fn accuracy(id: u64, accuracy: f64) -> Self {
        Response::Accuracy(AccuracyReply { id, accuracy })
    }

    pub fn error(id: Option<u64>, error: impl Into<String>) -> Self {
        Response::Error(ErrorReply {
            id,
            error: error.into(),
        })
    }

    pub fn id(&self) -> Option<u64> {
        match self {
            Response::Accuracy(r) => Some(r.id),
            Response::Error(r) => r.id,
        }
    }
}

pub fn encode_request(req: &Request) -> String {
    serde_json::to_string(req).expect("request serializes")
}

pub fn decode_request(line: &str) -> Result<Request> {
    serde_json::from_str(line.trim_end()).map_err(|e| Error::Protocol(format!("bad request: {e}")))
}

pub fn encode_response(resp: &Response) -> String {
    serde_json::to_string(resp).expect("response serializes")
}

pub fn decode_response(line: &str) -> Result<Response> {
    let resp: Response = serde_json::from_str(line.trim_end())
        .map_err(|e| Error::Protocol(format!("bad response: {e}")))?;
    if let Response::Accuracy(r) = &resp {
        if !(r.accuracy.is_finite() && (0.0..=100.0).contains(&r.accuracy)) {
            return Err(Error::Protocol(format!(
                "accuracy {} for id {} outside [0, 100]",
                r.accuracy, r.id
            )));
        }
    }
    Ok(resp)
}

/// Worker-side request loop. Reads requests until end of input, answering
/// each with `handler`'s accuracy or error. Malformed lines get an
/// `{"id":null,...}` error and the loop carries on.
pub fn serve<R, W, F>(reader: R, mut writer: W, mut handler: F) -> std::io::Result<()>
where
    R: BufRead,
    W: Write,
    F: FnMut(&Request) -> std::result::Result<f64, String>,
{
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = match decode_request(&line) {
            Ok(req) => match handler(&req) {
                Ok(acc) => Response::accuracy(req.id, acc),
                Err(msg) => Response::error(Some(req.id), msg),
            },
            Err(e) => Response::error(None, e.to_string()),
        };
        writeln!(writer, "{}", encode_response(&resp))?;
        writer.flush()?;
    }
    Ok(())
}
