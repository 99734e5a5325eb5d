//! `Idempotency-Key` replay for mutating requests.

use std::collections::hash_map::DefaultHasher;
use std::collections::{HashMap, VecDeque};
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex};

use axum::body::{to_bytes, Body, Bytes};
use axum::extract::{Request, State};
use axum::http::{HeaderMap, Method, StatusCode};
use axum::middleware::Next;
use axum::response::{IntoResponse, Response};

use crate::{ApiError, AppState};

pub const HEADER: &str = "idempotency-key";
const REPLAYED: &str = "idempotent-replayed";
const MAX_BODY: usize = 16 * 1024 * 1024;

type Key = (String, Method, String);

#[derive(Clone)]
struct Stored {
    fingerprint: u64,
    status: StatusCode,
    headers: HeaderMap,
    body: Bytes,
}

#[derive(Default)]
struct Inner {
    done: HashMap<Key, Stored>,
    order: VecDeque<Key>,
    in_flight: HashMap<Key, Arc<tokio::sync::Mutex<()>>>,
}

/// Bounded cache of completed responses; oldest keys are evicted first.
pub struct IdempotencyCache {
    capacity: usize,
    inner: Mutex<Inner>,
}

impl IdempotencyCache {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            inner: Mutex::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().done.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn lock_for(&self, key: &Key) -> Arc<tokio::sync::Mutex<()>> {
        self.inner
            .lock()
            .unwrap()
            .in_flight
            .entry(key.clone())
            .or_default()
            .clone()
    }

    fn get(&self, key: &Key) -> Option<Stored> {
        self.inner.lock().unwrap().done.get(key).cloned()
    }

    fn put(&self, key: Key, stored: Stored) {
        let mut inner = self.inner.lock().unwrap();
        if inner.done.insert(key.clone(), stored).is_none() {
            inner.order.push_back(key);
        }
        while inner.done.len() > self.capacity {
            let Some(old) = inner.order.pop_front() else { break };
            inner.done.remove(&old);
            inner.in_flight.remove(&old);
        }
    }
}

fn fingerprint(body: &[u8]) -> u64 {
    let mut h = DefaultHasher::new();
    body.hash(&mut h);
    h.finish()
}

fn replay(stored: Stored) -> Response {
    let mut response = (stored.status, stored.body).into_response();
    *response.headers_mut() = stored.headers;
    response
        .headers_mut()
        .insert(REPLAYED, "true".parse().unwrap());
    response
}

pub(crate) async fn layer(State(state): State<AppState>, req: Request, next: Next) -> Response {
    let method = req.method().clone();
    let key = req
        .headers()
        .get(HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::to_string);
    let Some(key) = key.filter(|_| method != Method::GET && method != Method::HEAD) else {
        return next.run(req).await;
    };
    let key: Key = (key, method, req.uri().path().to_string());

    let (parts, body) = req.into_parts();
    let body = match to_bytes(body, MAX_BODY).await {
        Ok(b) => b,
        Err(e) => {
            return ApiError::new(StatusCode::BAD_REQUEST, "bad-request", e.to_string())
                .into_response()
        }
    };
    let fp = fingerprint(&body);

    let cache = state.idempotency.clone();
    let gate = cache.lock_for(&key);
    let _held = gate.lock().await;
    if let Some(stored) = cache.get(&key) {
        if stored.fingerprint != fp {
            return ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "idempotency-key-reused",
                "this idempotency key was used with a different request body",
            )
            .into_response();
        }
        return replay(stored);
    }

    let response = next.run(Request::from_parts(parts, Body::from(body))).await;
    if response.status().is_server_error() {
        return response;
    }
    let (parts, body) = response.into_parts();
    let bytes = match to_bytes(body, usize::MAX).await {
        Ok(b) => b,
        Err(e) => {
            return ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
                .into_response()
        }
    };
    cache.put(
        key,
        Stored {
            fingerprint: fp,
            status: parts.status,
            headers: parts.headers.clone(),
            body: bytes.clone(),
        },
    );
    Response::from_parts(parts, Body::from(bytes))
}
