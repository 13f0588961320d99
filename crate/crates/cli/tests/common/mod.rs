//! Shared test plumbing: scratch directories, deterministic image and
//! depth fixtures, and a chat-completions stub server.
//!
//! The stub is single-threaded raw TCP serving one scripted reply per
//! incoming request. `connection: close` forces the client to reconnect,
//! so each accepted connection is exactly one request and retry counts map
//! 1:1 onto accepted connections.

#![allow(dead_code)] // compiled into several test targets with different needs

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::thread;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use softfx_core::raster::io as raster_io;
use softfx_core::{ColorTag, Raster};

/// Fresh unique directory under the system temp dir.
pub fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "softfx-test-{tag}-{}-{}",
        std::process::id(),
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .unwrap()
            .as_nanos()
    ));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Deterministic textured RGB image: smooth ramps plus seeded noise, so
/// renders and metrics have real structure to chew on.
pub fn textured_image(width: usize, height: usize, seed: u64) -> Raster {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = Raster::new(width, height, 3, ColorTag::Srgb);
    for y in 0..height {
        for x in 0..width {
            let fx = x as f64 / width.max(2) as f64;
            let fy = y as f64 / height.max(2) as f64;
            let base = [fx, fy, 0.5 * (fx + fy)];
            for (c, &b) in base.iter().enumerate() {
                let v: f64 = 0.7 * b + 0.3 * rng.random::<f64>();
                img.set(x, y, c, v.clamp(0.0, 1.0));
            }
        }
    }
    img
}

/// Depth ramp as a single-channel raster in [0, 1], far at the top-right.
pub fn depth_ramp(width: usize, height: usize) -> Raster {
    let mut img = Raster::new(width, height, 1, ColorTag::Gray);
    for y in 0..height {
        for x in 0..width {
            img.set(x, y, 0, (x + y) as f64 / (width + height - 2).max(1) as f64);
        }
    }
    img
}

pub fn write_image(path: &Path, img: &Raster) {
    raster_io::save_png(path, img).unwrap();
}

pub fn write_depth16(path: &Path, img: &Raster) {
    raster_io::save_png16(path, img).unwrap();
}

/// Little-endian grayscale PFM, rows stored bottom-up as the format wants.
pub fn write_depth_pfm(path: &Path, img: &Raster) {
    let mut bytes = format!("Pf\n{} {}\n-1.0\n", img.width(), img.height()).into_bytes();
    for row in (0..img.height()).rev() {
        for x in 0..img.width() {
            bytes.extend_from_slice(&(img.get(x, row, 0) as f32).to_le_bytes());
        }
    }
    std::fs::write(path, bytes).unwrap();
}

#[derive(Clone, Debug)]
pub enum StubReply {
    /// 200 OK whose assistant message content is this text.
    Content(String),
    /// A bare HTTP status with an empty JSON body.
    Status(u16),
}

pub struct StubServer {
    /// API root to put in `VLM_API_BASE` (includes a `/v1` path).
    pub base_url: String,
    handle: Option<thread::JoinHandle<Vec<String>>>,
}

impl StubServer {
    /// Serves exactly `replies.len()` requests, in order, then stops.
    pub fn start(replies: Vec<StubReply>) -> StubServer {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub");
        let addr = listener.local_addr().expect("stub addr");
        let handle = thread::spawn(move || {
            let mut bodies = Vec::new();
            for reply in &replies {
                let (stream, _) = listener.accept().expect("stub accept");
                bodies.push(serve_one(stream, reply));
            }
            bodies
        });
        StubServer {
            base_url: format!("http://{addr}/v1"),
            handle: Some(handle),
        }
    }

    /// Waits for all scripted requests and returns their raw bodies.
    pub fn finish(mut self) -> Vec<String> {
        self.handle
            .take()
            .expect("stub running")
            .join()
            .expect("stub thread")
    }
}

fn serve_one(stream: TcpStream, reply: &StubReply) -> String {
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    reader.read_line(&mut line).expect("request line");
    let mut content_length = 0usize;
    loop {
        let mut header = String::new();
        reader.read_line(&mut header).expect("header line");
        let header = header.trim_end();
        if header.is_empty() {
            break;
        }
        if let Some(value) = header
            .to_ascii_lowercase()
            .strip_prefix("content-length:")
            .map(str::trim)
        {
            content_length = value.parse().expect("content-length value");
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body).expect("request body");
    let body = String::from_utf8_lossy(&body).into_owned();

    let (status, payload) = match reply {
        StubReply::Content(text) => {
            let message = serde_json::json!({
                "choices": [{ "message": { "role": "assistant", "content": text } }]
            });
            ("200 OK".to_string(), message.to_string())
        }
        StubReply::Status(code) => (format!("{code} Stub"), "{}".to_string()),
    };
    let response = format!(
        "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{payload}",
        payload.len()
    );
    let mut stream = reader.into_inner();
    stream.write_all(response.as_bytes()).expect("stub write");
    stream.flush().expect("stub flush");
    body
}
