//! The local-tracker adapter boundary.
//!
//! A local tracker sees only unwarped search-region images and talks in
//! local pixel boxes. In-process trackers implement [`Adapter`]; external
//! ones run as a subprocess speaking newline-delimited JSON over
//! stdin/stdout with raw PNG payloads:
//!
//! ```text
//! harness -> {"type":"hello","version":1}
//! adapter <- {"type":"ready","name":"..."}
//! harness -> {"type":"init","width":W,"height":H,"bbox":[cx,cy,w,h,gamma],"image_bytes":N}
//!            followed by exactly N bytes of PNG
//! adapter <- {"type":"ok"}
//! harness -> {"type":"track","width":W,"height":H,"image_bytes":N} + N bytes of PNG
//! adapter <- {"type":"result","bbox":[cx,cy,w,h,gamma],"score":s}
//! harness -> {"type":"bye"}
//! ```
//!
//! Boxes are center-based in local-image pixels; `gamma` is in degrees on
//! the wire. [`SubprocessAdapter`] is the harness-side client and
//! [`serve_adapter`] the adapter-side server loop, so any [`Adapter`]
//! implementation can be exposed as an external process.

use std::io::{BufRead, BufReader, Cursor, Read, Write};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc;
use std::time::Duration;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::annotations::Bbox;
use crate::error::{Error, Result};

pub const PROTOCOL_VERSION: u32 = 1;

/// Environment variable naming the per-step search-region file the harness
/// maintains for adapters that want global context (see the oracle).
pub const SEARCH_FILE_ENV: &str = "OMNITRACK_SEARCH_FILE";

/// A local prediction: box in local-image pixels plus a confidence score.
#[derive(Debug, Clone, Copy)]
pub struct LocalTrack {
    pub bbox: Bbox,
    pub score: f64,
}

/// A local visual tracker.
pub trait Adapter {
    fn name(&self) -> &str {
        "adapter"
    }

    /// First frame: the unwarped init region and the target box within it.
    fn init(&mut self, image: &RgbImage, bbox: &Bbox) -> Result<()>;

    /// Later frames: locate the target in the unwarped search region.
    fn track(&mut self, image: &RgbImage) -> Result<LocalTrack>;
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum HarnessMessage {
    Hello {
        version: u32,
    },
    Init {
        width: u32,
        height: u32,
        bbox: [f64; 5],
        image_bytes: usize,
    },
    Track {
        width: u32,
        height: u32,
        image_bytes: usize,
    },
    Bye,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum AdapterMessage {
    Ready { name: String },
    Ok,
    Result { bbox: [f64; 5], score: f64 },
}

fn wire_box(b: &Bbox) -> [f64; 5] {
    [b.cx, b.cy, b.w, b.h, b.gamma.to_degrees()]
}

fn unwire_box(v: &[f64; 5]) -> Result<Bbox> {
    Bbox::new(v[0], v[1], v[2].max(1e-9), v[3].max(1e-9), v[4].to_radians())
        .map_err(|e| Error::Protocol(format!("bad box on the wire: {e}")))
}

fn encode_png(image: &RgbImage) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    image.write_to(&mut Cursor::new(&mut buf), image::ImageFormat::Png)?;
    Ok(buf)
}

/// Harness-side client around an external adapter process.
pub struct SubprocessAdapter {
    child: Child,
    stdin: std::process::ChildStdin,
    lines: mpsc::Receiver<std::io::Result<String>>,
    timeout: Duration,
    name: String,
    dead: bool,
}

impl SubprocessAdapter {
    /// Launch `command` (shell-like split: quotes respected) and run the
    /// hello/ready handshake. `envs` are set on the child.
    pub fn spawn(command: &str, envs: &[(String, String)], timeout: Duration) -> Result<Self> {
        let argv = split_command(command)?;
        let (program, args) = argv
            .split_first()
            .ok_or_else(|| Error::Adapter("empty adapter command".into()))?;
        let mut cmd = Command::new(program);
        cmd.args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit());
        for (k, v) in envs {
            cmd.env(k, v);
        }
        let mut child = cmd
            .spawn()
            .map_err(|e| Error::Adapter(format!("failed to launch '{command}': {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");

        // A reader thread turns blocking pipe reads into timeout-able
        // channel receives. It owns the pipe; binary payloads never flow
        // adapter -> harness, so line framing is safe.
        let (line_tx, line_rx) = mpsc::channel();
        std::thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        if line_tx.send(Ok(line)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = line_tx.send(Err(e));
                        break;
                    }
                }
            }
        });

        let mut adapter = SubprocessAdapter {
            child,
            stdin,
            lines: line_rx,
            timeout,
            name: String::new(),
            dead: false,
        };
        adapter.send(&HarnessMessage::Hello {
            version: PROTOCOL_VERSION,
        })?;
        match adapter.recv()? {
            AdapterMessage::Ready { name } => adapter.name = name,
            other => {
                return Err(Error::Protocol(format!(
                    "expected ready, got {other:?}"
                )))
            }
        }
        Ok(adapter)
    }

    fn send(&mut self, msg: &HarnessMessage) -> Result<()> {
        if self.dead {
            return Err(Error::Adapter("adapter process is gone".into()));
        }
        let mut line = serde_json::to_string(msg)
            .map_err(|e| Error::Protocol(format!("encode: {e}")))?;
        line.push('\n');
        self.stdin.write_all(line.as_bytes()).map_err(|e| {
            self.dead = true;
            Error::Adapter(format!("write to adapter failed: {e}"))
        })
    }

    fn send_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        self.stdin
            .write_all(bytes)
            .and_then(|_| self.stdin.flush())
            .map_err(|e| {
                self.dead = true;
                Error::Adapter(format!("write to adapter failed: {e}"))
            })
    }

    fn recv(&mut self) -> Result<AdapterMessage> {
        if self.dead {
            return Err(Error::Adapter("adapter process is gone".into()));
        }
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => serde_json::from_str(&line)
                .map_err(|e| Error::Protocol(format!("bad reply '{}': {e}", line.trim()))),
            Ok(Err(e)) => {
                self.dead = true;
                Err(Error::Adapter(format!("read from adapter failed: {e}")))
            }
            Err(mpsc::RecvTimeoutError::Timeout) => {
                self.dead = true;
                Err(Error::Adapter(format!(
                    "adapter timed out after {:?}",
                    self.timeout
                )))
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                self.dead = true;
                Err(Error::Adapter("adapter closed its output".into()))
            }
        }
    }
}

impl Adapter for SubprocessAdapter {
    fn name(&self) -> &str {
        &self.name
    }

    fn init(&mut self, image: &RgbImage, bbox: &Bbox) -> Result<()> {
        let png = encode_png(image)?;
        self.send(&HarnessMessage::Init {
            width: image.width(),
            height: image.height(),
            bbox: wire_box(bbox),
            image_bytes: png.len(),
        })?;
        self.send_bytes(&png)?;
        match self.recv()? {
            AdapterMessage::Ok => Ok(()),
            other => Err(Error::Protocol(format!("expected ok, got {other:?}"))),
        }
    }

    fn track(&mut self, image: &RgbImage) -> Result<LocalTrack> {
        let png = encode_png(image)?;
        self.send(&HarnessMessage::Track {
            width: image.width(),
            height: image.height(),
            image_bytes: png.len(),
        })?;
        self.send_bytes(&png)?;
        match self.recv()? {
            AdapterMessage::Result { bbox, score } => Ok(LocalTrack {
                bbox: unwire_box(&bbox)?,
                score,
            }),
            other => Err(Error::Protocol(format!("expected result, got {other:?}"))),
        }
    }
}

impl Drop for SubprocessAdapter {
    fn drop(&mut self) {
        if !self.dead {
            let _ = self.send(&HarnessMessage::Bye);
        }
        // give it a moment, then make sure it is gone
        std::thread::sleep(Duration::from_millis(50));
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Adapter-side server loop: speak the wire protocol on the given streams,
/// delegating to an in-process tracker. Returns when the harness says bye
/// or closes the pipe. Protocol violations and undecodable payloads return
/// an error so the process can exit nonzero.
pub fn serve_adapter(
    adapter: &mut dyn Adapter,
    input: &mut dyn Read,
    output: &mut dyn Write,
) -> Result<()> {
    let mut reader = BufReader::new(input);
    let reply = |output: &mut dyn Write, msg: &AdapterMessage| -> Result<()> {
        let mut line =
            serde_json::to_string(msg).map_err(|e| Error::Protocol(format!("encode: {e}")))?;
        line.push('\n');
        output.write_all(line.as_bytes())?;
        output.flush()?;
        Ok(())
    };
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Ok(()); // harness went away
        }
        if line.trim().is_empty() {
            continue;
        }
        let msg: HarnessMessage = serde_json::from_str(&line)
            .map_err(|e| Error::Protocol(format!("bad message '{}': {e}", line.trim())))?;
        match msg {
            HarnessMessage::Hello { version } => {
                if version != PROTOCOL_VERSION {
                    return Err(Error::Protocol(format!(
                        "unsupported protocol version {version}"
                    )));
                }
                reply(
                    output,
                    &AdapterMessage::Ready {
                        name: adapter.name().to_string(),
                    },
                )?;
            }
            HarnessMessage::Init {
                width,
                height,
                bbox,
                image_bytes,
            } => {
                let image = read_png_payload(&mut reader, image_bytes, width, height)?;
                adapter.init(&image, &unwire_box(&bbox)?)?;
                reply(output, &AdapterMessage::Ok)?;
            }
            HarnessMessage::Track {
                width,
                height,
                image_bytes,
            } => {
                let image = read_png_payload(&mut reader, image_bytes, width, height)?;
                let t = adapter.track(&image)?;
                reply(
                    output,
                    &AdapterMessage::Result {
                        bbox: wire_box(&t.bbox),
                        score: t.score,
                    },
                )?;
            }
            HarnessMessage::Bye => return Ok(()),
        }
    }
}

fn read_png_payload(
    reader: &mut dyn Read,
    len: usize,
    width: u32,
    height: u32,
) -> Result<RgbImage> {
    let mut buf = vec![0u8; len];
    reader.read_exact(&mut buf)?;
    let img = image::load_from_memory_with_format(&buf, image::ImageFormat::Png)?.into_rgb8();
    if img.width() != width || img.height() != height {
        return Err(Error::Protocol(format!(
            "payload is {}x{}, header said {}x{}",
            img.width(),
            img.height(),
            width,
            height
        )));
    }
    Ok(img)
}

/// Minimal shell-like splitting: whitespace-separated, single or double
/// quotes group, no escapes.
pub fn split_command(s: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    let mut pending = false;
    for c in s.chars() {
        match quote {
            Some(q) if c == q => {
                quote = None;
            }
            Some(_) => cur.push(c),
            None if c == '\'' || c == '"' => {
                quote = Some(c);
                pending = true;
            }
            None if c.is_whitespace() => {
                if pending || !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                    pending = false;
                }
            }
            None => cur.push(c),
        }
    }
    if quote.is_some() {
        return Err(Error::Validation(format!("unbalanced quote in '{s}'")));
    }
    if pending || !cur.is_empty() {
        out.push(cur);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_splitting() {
        assert_eq!(
            split_command("prog a b").unwrap(),
            vec!["prog", "a", "b"]
        );
        assert_eq!(
            split_command("prog 'a b' \"c d\"").unwrap(),
            vec!["prog", "a b", "c d"]
        );
        assert_eq!(split_command("prog ''").unwrap(), vec!["prog", ""]);
        assert!(split_command("prog 'oops").is_err());
    }

    /// A trivial echo tracker for exercising the server loop in memory.
    struct Echo {
        last: Option<Bbox>,
    }

    impl Adapter for Echo {
        fn name(&self) -> &str {
            "echo"
        }

        fn init(&mut self, _image: &RgbImage, bbox: &Bbox) -> Result<()> {
            self.last = Some(*bbox);
            Ok(())
        }

        fn track(&mut self, _image: &RgbImage) -> Result<LocalTrack> {
            Ok(LocalTrack {
                bbox: self.last.expect("init first"),
                score: 0.5,
            })
        }
    }

    #[test]
    fn server_loop_round_trip_in_memory() {
        let img = RgbImage::from_pixel(32, 16, image::Rgb([1, 2, 3]));
        let png = encode_png(&img).unwrap();
        let mut input = Vec::new();
        input.extend_from_slice(b"{\"type\":\"hello\",\"version\":1}\n");
        input.extend_from_slice(
            format!(
                "{{\"type\":\"init\",\"width\":32,\"height\":16,\"bbox\":[16.0,8.0,10.0,6.0,0.0],\"image_bytes\":{}}}\n",
                png.len()
            )
            .as_bytes(),
        );
        input.extend_from_slice(&png);
        input.extend_from_slice(
            format!(
                "{{\"type\":\"track\",\"width\":32,\"height\":16,\"image_bytes\":{}}}\n",
                png.len()
            )
            .as_bytes(),
        );
        input.extend_from_slice(&png);
        input.extend_from_slice(b"{\"type\":\"bye\"}\n");

        let mut out = Vec::new();
        let mut echo = Echo { last: None };
        serve_adapter(&mut echo, &mut input.as_slice(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].contains("\"ready\""));
        assert!(lines[1].contains("\"ok\""));
        assert!(lines[2].contains("\"result\"") && lines[2].contains("16.0"));
    }

    #[test]
    fn server_rejects_bad_version() {
        let mut input: &[u8] = b"{\"type\":\"hello\",\"version\":9}\n";
        let mut out = Vec::new();
        let mut echo = Echo { last: None };
        assert!(serve_adapter(&mut echo, &mut input, &mut out).is_err());
    }
}
