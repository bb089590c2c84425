#![allow(dead_code)]

use std::net::SocketAddr;
use std::sync::Arc;

use compass_core::Timestamp;
use compass_service::api::{self, AppState};
use compass_service::store::Store;
use serde_json::Value;

pub struct Client {
    agent: ureq::Agent,
    base: String,
}

pub struct Reply {
    pub status: u16,
    pub body: String,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.body).unwrap_or_else(|e| panic!("{e}: {}", self.body))
    }

    pub fn error_code(&self) -> String {
        self.json()["error"]["code"].as_str().unwrap_or_default().to_owned()
    }
}

fn finish(r: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Reply {
    let mut resp = r.expect("request failed");
    let status = resp.status().as_u16();
    let body = resp.body_mut().read_to_string().unwrap_or_default();
    Reply { status, body }
}

impl Client {
    pub fn new(addr: SocketAddr) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Client { agent, base: format!("http://{addr}") }
    }

    pub fn get(&self, path: &str) -> Reply {
        finish(self.agent.get(format!("{}{path}", self.base)).call())
    }

    pub fn put(&self, path: &str, body: impl AsRef<[u8]>) -> Reply {
        finish(self.agent.put(format!("{}{path}", self.base)).header("content-type", "application/json").send(body.as_ref()))
    }

    pub fn post(&self, path: &str, body: impl AsRef<[u8]>) -> Reply {
        finish(self.agent.post(format!("{}{path}", self.base)).header("content-type", "application/json").send(body.as_ref()))
    }
}

/// A clock pinned to one instant, so every response is reproducible.
pub fn fixed_clock(iso: &str) -> api::Clock {
    let t = Timestamp::parse(iso).unwrap();
    Arc::new(move || t)
}

pub fn start(store: Store) -> Client {
    let state = AppState::new(store).with_clock(fixed_clock("2025-02-01T00:00:00Z"));
    let addr = api::spawn("127.0.0.1:0".parse().unwrap(), state).expect("bind");
    Client::new(addr)
}
