//! Shared test support: a minimal HTTP stub for the embeddings endpoint and
//! an on-disk fixture scenario.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

/// One parsed HTTP request.
#[derive(Debug, Clone)]
pub struct StubRequest {
    pub method: String,
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl StubRequest {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body).expect("request body is JSON")
    }
}

/// Response the handler returns.
pub struct StubResponse {
    pub status: u16,
    pub body: String,
}

impl StubResponse {
    pub fn json(value: serde_json::Value) -> Self {
        Self { status: 200, body: value.to_string() }
    }

    pub fn status(status: u16, body: &str) -> Self {
        Self { status, body: body.to_string() }
    }
}

/// Builds an OpenAI-shaped embeddings response for `vectors`.
pub fn embeddings_json(vectors: &[Vec<f64>]) -> serde_json::Value {
    serde_json::json!({
        "data": vectors
            .iter()
            .enumerate()
            .map(|(i, v)| serde_json::json!({ "index": i, "embedding": v }))
            .collect::<Vec<_>>(),
    })
}

/// A single-threaded HTTP/1.1 stub bound to a random local port.
pub struct StubServer {
    addr: SocketAddr,
    hits: Arc<AtomicUsize>,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    /// Starts the server; `handler` gets the 0-based request index.
    pub fn start<F>(handler: F) -> Self
    where
        F: Fn(usize, &StubRequest) -> StubResponse + Send + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub server");
        let addr = listener.local_addr().unwrap();
        let hits = Arc::new(AtomicUsize::new(0));
        let shutdown = Arc::new(AtomicBool::new(false));
        let thread_hits = hits.clone();
        let thread_shutdown = shutdown.clone();
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if thread_shutdown.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let index = thread_hits.fetch_add(1, Ordering::SeqCst);
                let _ = serve_one(stream, index, &handler);
            }
        });
        Self { addr, hits, shutdown, handle: Some(handle) }
    }

    pub fn url(&self) -> String {
        format!("http://{}/embeddings", self.addr)
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr); // unblock accept
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn serve_one<F>(stream: TcpStream, index: usize, handler: &F) -> std::io::Result<()>
where
    F: Fn(usize, &StubRequest) -> StubResponse,
{
    let mut reader = BufReader::new(stream);
    let mut request_line = String::new();
    reader.read_line(&mut request_line)?;
    let mut parts = request_line.split_whitespace();
    let method = parts.next().unwrap_or("").to_string();
    let path = parts.next().unwrap_or("").to_string();

    let mut headers = Vec::new();
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line)?;
        let line = line.trim_end().to_string();
        if line.is_empty() {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            let name = name.trim().to_string();
            let value = value.trim().to_string();
            if name.eq_ignore_ascii_case("content-length") {
                content_length = value.parse().unwrap_or(0);
            }
            headers.push((name, value));
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;

    let request = StubRequest { method, path, headers, body };
    let response = handler(index, &request);
    let mut stream = reader.into_inner();
    let payload = format!(
        "HTTP/1.1 {} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        response.status,
        response.body.len(),
        response.body
    );
    stream.write_all(payload.as_bytes())?;
    stream.flush()
}

// ---------------------------------------------------------------------------
// On-disk fixture scenario
// ---------------------------------------------------------------------------

/// Paths of a generated fixture.
pub struct Fixture {
    pub scenario_dir: PathBuf,
    pub manifest: PathBuf,
    pub cache_dir: PathBuf,
    pub instance_dir: PathBuf,
    pub n_instances: usize,
}

/// Writes a clustered scenario to disk: `clusters` content clusters of
/// `per_cluster` instances each, one algorithm per cluster solving it in
/// 10 s while the others time out, folds assigned round-robin, and features
/// that track the cluster. Instance files carry cluster-specific vocabulary
/// so hashed n-grams separate them.
pub fn write_fixture(root: &Path, clusters: usize, per_cluster: usize, folds: u32) -> Fixture {
    let scenario_dir = root.join("scenario");
    let instance_dir = root.join("instances");
    let cache_dir = root.join("cache");
    std::fs::create_dir_all(&scenario_dir).unwrap();
    std::fs::create_dir_all(&instance_dir).unwrap();

    let cutoff = 600.0;
    let algorithms: Vec<String> = (0..clusters).map(|c| format!("solver{c}")).collect();

    let mut description = String::new();
    description.push_str("scenario_id: FIXTURE\n");
    description.push_str("performance_measures: runtime\n");
    description.push_str(&format!("algorithm_cutoff_time: {cutoff}\n"));
    description.push_str("metainfo_algorithms:\n");
    for a in &algorithms {
        description.push_str(&format!("  {a}:\n    deterministic: true\n"));
    }
    std::fs::write(scenario_dir.join("description.txt"), description).unwrap();

    let vocab = ["alpha beta gamma", "omicron pi rho", "uvw xyz qrs", "nop lmn hij"];
    let mut runs = String::from(
        "@relation runs\n@attribute instance_id string\n@attribute repetition numeric\n@attribute algorithm string\n@attribute runtime numeric\n@attribute runstatus {ok,timeout}\n@data\n",
    );
    let mut cv = String::from(
        "@relation cv\n@attribute instance_id string\n@attribute repetition numeric\n@attribute fold numeric\n@data\n",
    );
    let mut features = String::from(
        "@relation features\n@attribute instance_id string\n@attribute repetition numeric\n@attribute f_cluster numeric\n@attribute f_noise numeric\n@data\n",
    );
    let mut manifest = String::new();

    let n = clusters * per_cluster;
    for i in 0..n {
        let cluster = i / per_cluster;
        let id = format!("inst{i:03}");
        for (a, algorithm) in algorithms.iter().enumerate() {
            if a == cluster {
                runs.push_str(&format!("{id},1,{algorithm},{},ok\n", 10.0 + (i % 7) as f64));
            } else {
                runs.push_str(&format!("{id},1,{algorithm},{cutoff},timeout\n"));
            }
        }
        cv.push_str(&format!("{id},1,{}\n", (i % folds as usize) + 1));
        features.push_str(&format!(
            "{id},1,{},{}\n",
            cluster as f64 * 10.0 + (i % 3) as f64 * 0.1,
            (i % 5) as f64
        ));

        // Many lines of cluster vocabulary (so shuffling has something to do),
        // plus a unique line per instance.
        let mut content = String::new();
        for line in 0..40 {
            content.push_str(&format!("{} {} {}\n", vocab[cluster % vocab.len()], line, i));
        }
        content.push_str(&format!("unique-{i}\n"));
        let file = instance_dir.join(format!("{id}.txt"));
        std::fs::write(&file, content).unwrap();
        manifest.push_str(&format!("{id}\t{}\n", file.display()));
    }

    std::fs::write(scenario_dir.join("algorithm_runs.arff"), runs).unwrap();
    std::fs::write(scenario_dir.join("cv.arff"), cv).unwrap();
    std::fs::write(scenario_dir.join("feature_values.arff"), features).unwrap();
    let manifest_path = root.join("instances.tsv");
    std::fs::write(&manifest_path, manifest).unwrap();

    Fixture {
        scenario_dir,
        manifest: manifest_path,
        cache_dir,
        instance_dir,
        n_instances: n,
    }
}
