//! Interactive render service: a live scene edited over HTTP, rendered by a
//! single worker thread, and streamed as PNG frames over a WebSocket.

pub mod http;
pub mod service;

pub use http::{frame_message, router};
pub use service::{CameraEdit, Params, RecordRequest, RecordResult, SceneSummary, Service, ServiceConfig, ServiceError, StateView};

/// Serves `service` on `addr` until the process exits.
pub async fn run(service: Service, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(service)).await
}
