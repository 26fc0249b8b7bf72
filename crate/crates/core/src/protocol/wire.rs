//! Line protocol over TCP.
//!
//! Client to server:
//!
//! ```text
//! REGISTER <k> <hex-endpoint>
//! AUTH <hex-value>
//! ```
//!
//! Server to client: `OK <verified-count>`, `FAIL`, or `ERR <reason>`.
//! `ERR` ends the session. One message per LF-terminated line; hex is
//! lowercase with exactly two digits per octet.

use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::thread;

use crate::error::{Error, Result};
use crate::owf::{Owf, Value};
use crate::pebbler::MAX_ORDER;

use super::{Verdict, Verifier};

/// A server reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reply {
    Ok(u64),
    Fail,
    Err(String),
}

impl fmt::Display for Reply {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reply::Ok(n) => write!(f, "OK {n}"),
            Reply::Fail => f.write_str("FAIL"),
            Reply::Err(reason) => write!(f, "ERR {reason}"),
        }
    }
}

impl Reply {
    pub fn parse(line: &str) -> Result<Self> {
        let line = line.trim_end_matches(['\r', '\n']);
        if line == "FAIL" {
            return Ok(Reply::Fail);
        }
        if let Some(n) = line.strip_prefix("OK ") {
            return n
                .parse()
                .map(Reply::Ok)
                .map_err(|_| Error::Decode(format!("bad reply `{line}`")));
        }
        if let Some(reason) = line.strip_prefix("ERR ") {
            return Ok(Reply::Err(reason.to_string()));
        }
        Err(Error::Decode(format!("bad reply `{line}`")))
    }
}

/// Per-connection verifier state.
#[derive(Debug)]
pub struct Session {
    owf: Owf,
    registered: Option<(Verifier, u64)>,
}

impl Session {
    pub fn new(owf: Owf) -> Self {
        Session {
            owf,
            registered: None,
        }
    }

    pub fn verifier(&self) -> Option<&Verifier> {
        self.registered.as_ref().map(|(v, _)| v)
    }

    /// Handles one request line. A reply of [`Reply::Err`] closes the
    /// session.
    pub fn handle(&mut self, line: &str) -> Reply {
        let mut words = line.trim_end_matches(['\r', '\n']).split(' ');
        let command = words.next().unwrap_or("");
        let args: Vec<&str> = words.collect();
        match (command, args.as_slice()) {
            ("REGISTER", [k, hex]) => self.register(k, hex),
            ("AUTH", [hex]) => self.auth(hex),
            ("REGISTER" | "AUTH", _) => Reply::Err("bad-arguments".into()),
            _ => Reply::Err("unknown-command".into()),
        }
    }

    fn register(&mut self, k: &str, hex: &str) -> Reply {
        if self.registered.is_some() {
            return Reply::Err("already-registered".into());
        }
        let k: u32 = match k.parse() {
            Ok(k) if k <= MAX_ORDER => k,
            _ => return Reply::Err("bad-order".into()),
        };
        let Ok(endpoint) = self.owf.parse_value(hex) else {
            return Reply::Err("bad-value".into());
        };
        let verifier = Verifier::register(self.owf.clone(), endpoint).expect("width checked");
        self.registered = Some((verifier, 1u64 << k));
        Reply::Ok(0)
    }

    fn auth(&mut self, hex: &str) -> Reply {
        let Some((verifier, n)) = self.registered.as_mut() else {
            return Reply::Err("not-registered".into());
        };
        let Ok(candidate) = self.owf.parse_value(hex) else {
            return Reply::Err("bad-value".into());
        };
        if verifier.verified() == *n {
            return Reply::Err("chain-exhausted".into());
        }
        match verifier.check(&candidate) {
            Verdict::Accept => Reply::Ok(verifier.verified()),
            Verdict::Reject => Reply::Fail,
        }
    }
}

/// Serves one connection until the peer disconnects or an `ERR` is sent.
pub fn handle_connection(stream: TcpStream, owf: Owf) -> Result<()> {
    let reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    let mut session = Session::new(owf);
    for line in reader.lines() {
        let reply = match line {
            Ok(line) => session.handle(&line),
            Err(e) if e.kind() == std::io::ErrorKind::InvalidData => {
                Reply::Err("bad-encoding".into())
            }
            Err(e) => return Err(e.into()),
        };
        writeln!(writer, "{reply}")?;
        writer.flush()?;
        if matches!(reply, Reply::Err(_)) {
            break;
        }
    }
    Ok(())
}

/// Accepts connections forever, one thread per connection.
pub fn serve(listener: TcpListener, owf: Owf) -> Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let owf = owf.clone();
        thread::spawn(move || {
            let _ = handle_connection(stream, owf);
        });
    }
    Ok(())
}

/// Client end of a session.
#[derive(Debug)]
pub struct Client {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self> {
        let stream = TcpStream::connect(addr)?;
        Ok(Client {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
        })
    }

    /// Sends a raw request line and waits for the reply.
    pub fn request(&mut self, line: &str) -> Result<Reply> {
        writeln!(self.writer, "{line}")?;
        self.writer.flush()?;
        let mut reply = String::new();
        if self.reader.read_line(&mut reply)? == 0 {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                "server closed the connection",
            )));
        }
        Reply::parse(&reply)
    }

    pub fn register(&mut self, k: u32, endpoint: &Value) -> Result<Reply> {
        self.request(&format!("REGISTER {k} {endpoint}"))
    }

    pub fn auth(&mut self, value: &Value) -> Result<Reply> {
        self.request(&format!("AUTH {value}"))
    }
}
