use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use seceig_core::codec::encode_vector;
use seceig_core::eigen::{PLAIN_TOL, SECURE_TOL};
use seceig_core::protocol::{CallKind, RemoteCloud};
use seceig_core::service::{Frame, LoopbackTransport, MsgType, RecordingTransport, Request, Server, TcpTransport, Transport};
use seceig_core::{
    collector_submit, owner_setup, secure_topk, topk, DenseBackend, DenseMatrix, EigenResult, SecureSession, Service,
    ServiceClient, ServiceConfig, SetupParams, UserGrant,
};

const N: usize = 12;

fn upload<T: Transport>(client: &mut ServiceClient<T>, a: &DenseMatrix, seed: u64) -> UserGrant {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut owner = owner_setup(&SetupParams::new(a.n_rows(), 512), &mut rng).unwrap();
    let art = owner.artifacts();
    let header = owner.matrix_header().unwrap();
    client.put_matrix_meta(1, &header).unwrap();
    let mut pieces = Vec::new();
    for (j, row) in a.rows().enumerate() {
        let sub = collector_submit(&art.public_key, &art.codec, &art.encrypted_b0.values, row, &mut rng).unwrap();
        client.put_row(1, j as u64, &sub.encrypted_row, header.ciphertext_width()).unwrap();
        pieces.push(Some(sub.encrypted_dot));
    }
    owner.owner_collect(&pieces).unwrap();
    owner.grant().unwrap()
}

fn matrix(seed: u64) -> DenseMatrix {
    DenseMatrix::random_symmetric(N, 1.0, 6, &mut ChaCha20Rng::seed_from_u64(seed))
}

fn plain(a: &DenseMatrix, start: &[f64], k: usize) -> EigenResult {
    topk(&mut DenseBackend::new(a.clone()).unwrap(), start, k, N, PLAIN_TOL).unwrap()
}

#[test]
fn tcp_session_matches_plaintext_solver() {
    let dir = tempfile::tempdir().unwrap();
    let service = Service::new(ServiceConfig::new(dir.path())).unwrap();
    let server = Server::bind("127.0.0.1:0", service).unwrap();
    let a = matrix(1);
    let mut client = ServiceClient::new(TcpTransport::connect(server.local_addr()).unwrap());
    let grant = upload(&mut client, &a, 2);
    let cloud = RemoteCloud::new(client, 1, grant.private_key.clone(), grant.codec.clone(), N);
    let mut session = SecureSession::new(cloud, &grant, 3, ChaCha20Rng::seed_from_u64(3)).unwrap();
    let secure = secure_topk(&mut session, 2, N, SECURE_TOL).unwrap();
    let reference = plain(&a, session.start_vector(), 2);
    for (s, p) in secure.result.values.iter().zip(&reference.values) {
        assert!((s - p).abs() <= 1e-4 * p.abs(), "{s} vs {p}");
    }
    assert_eq!(secure.seed_calls, 3);
    assert_eq!(secure.residual_calls, 2);
    // The cloud directory holds the matrix and results, nothing else.
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        assert!(name.ends_with(".seig") || name.ends_with(".sevr"), "{name}");
    }
}

struct Run {
    values: Vec<f64>,
    sent: Vec<Vec<u8>>,
    received: Vec<Vec<u8>>,
    transcript: Vec<(CallKind, Vec<BigUint>)>,
    grant: UserGrant,
    start: Vec<f64>,
}

fn recorded_run(seed: u64) -> Run {
    let dir = tempfile::tempdir().unwrap();
    let service = Service::new(ServiceConfig::new(dir.path())).unwrap();
    let mut client = ServiceClient::new(RecordingTransport::new(LoopbackTransport::new(service)));
    let a = matrix(seed);
    let grant = upload(&mut client, &a, seed + 1);
    let cloud = RemoteCloud::new(client, 1, grant.private_key.clone(), grant.codec.clone(), N);
    let mut session = SecureSession::new(cloud, &grant, 4, ChaCha20Rng::seed_from_u64(seed + 2)).unwrap();
    let out = secure_topk(&mut session, 3, N, SECURE_TOL).unwrap();
    let start = session.start_vector().to_vec();
    let transcript = session.transcript().iter().map(|e| (e.kind, e.sent.clone())).collect();
    let rec = session.into_cloud().into_client().into_transport();
    Run {
        values: out.result.values,
        sent: rec.sent,
        received: rec.received,
        transcript,
        grant,
        start,
    }
}

fn submitted_vectors(run: &Run) -> Vec<Vec<BigUint>> {
    let width = run.grant.codec.q_width();
    run.sent
        .iter()
        .filter_map(|bytes| match Request::from_frame(&Frame::decode(bytes).unwrap()).unwrap() {
            Request::SubmitMatvec { data, count, .. } => {
                assert_eq!(data.len(), count as usize * width);
                Some(data.chunks(width).map(BigUint::from_bytes_be).collect())
            }
            _ => None,
        })
        .collect()
}

#[test]
fn cloud_only_sees_perturbed_vectors() {
    let run = recorded_run(10);
    let submitted = submitted_vectors(&run);
    let recorded: Vec<Vec<BigUint>> = run.transcript.iter().map(|(_, v)| v.clone()).collect();
    assert_eq!(submitted, recorded);
    assert_eq!(run.transcript.iter().filter(|(k, _)| *k == CallKind::Seed).count(), 4);

    let q = run.grant.codec.q();
    let start = encode_vector(&run.start, run.grant.codec.decimal_digits(), q).unwrap();
    for v in &submitted {
        assert!(v.iter().all(|x| x < q));
        assert_ne!(v, &start);
        assert_ne!(v, &run.grant.b0);
    }

    // No frame in either direction carries the secret key or b0.
    let sk = &run.grant.private_key;
    let secrets: Vec<Vec<u8>> = [sk.p(), sk.q(), sk.lambda(), sk.mu()]
        .iter()
        .map(|x| x.to_bytes_be())
        .chain(run.grant.b0.iter().filter(|x| x.bits() > 64).map(|x| x.to_bytes_be()))
        .collect();
    for frame in run.sent.iter().chain(&run.received) {
        for s in &secrets {
            assert!(!frame.windows(s.len()).any(|w| w == s.as_slice()));
        }
    }
}

/// Request/response pairs without the NOT_READY polls, whose count depends on timing.
fn settled(run: &Run) -> Vec<(&[u8], &[u8])> {
    run.sent
        .iter()
        .zip(&run.received)
        .filter(|(_, resp)| resp[4] != MsgType::NotReady as u8)
        .map(|(s, r)| (s.as_slice(), r.as_slice()))
        .collect()
}

#[test]
fn seeded_sessions_replay_byte_for_byte() {
    let a = recorded_run(20);
    let b = recorded_run(20);
    assert_eq!(settled(&a), settled(&b));
    assert_eq!(a.values, b.values);
    let c = recorded_run(21);
    assert_ne!(a.sent, c.sent);
}
