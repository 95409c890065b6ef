//! Encode and decode the link's control packets and envelopes, and show how
//! topic filters match.
//!
//! ```bash
//! cargo run -p twinet --example mqtt_codec
//! ```

use twinet::mqtt::{decode, encode, topic_matches, validate_filter, ControlPacket, QoS};
use twinet::twinlink::{decode_envelope, encode_envelope, EnvelopeKind, MessageEnvelope};

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect::<Vec<_>>().join(" ")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let packets = [
        ControlPacket::Connect {
            client_id: "real".into(),
        },
        ControlPacket::Subscribe {
            packet_id: 1,
            filters: vec![("rw/#".into(), QoS::AtLeastOnce)],
        },
        ControlPacket::Publish {
            topic: "a/b".into(),
            payload: b"hi".to_vec(),
            qos: QoS::AtMostOnce,
            packet_id: None,
        },
        ControlPacket::Publish {
            topic: "rw/traffic".into(),
            payload: vec![0; 200],
            qos: QoS::AtLeastOnce,
            packet_id: Some(7),
        },
        ControlPacket::PubAck { packet_id: 7 },
        ControlPacket::PingReq,
        ControlPacket::Disconnect,
    ];
    for p in &packets {
        let bytes = encode(p)?;
        assert_eq!(&decode(&bytes)?, p);
        let shown = if bytes.len() > 16 {
            format!("{} ... ({} bytes)", hex(&bytes[..16]), bytes.len())
        } else {
            hex(&bytes)
        };
        println!("{:<11} {shown}", p.type_name());
    }

    let envelope = MessageEnvelope::new("rw/traffic", EnvelopeKind::TrafficUpdate, b"{\"tick\":1}".to_vec());
    let wire = encode_envelope(&envelope);
    println!("\nenvelope: {}", String::from_utf8_lossy(&wire));
    assert_eq!(decode_envelope(&wire)?, envelope);

    println!();
    for (filter, topic) in [
        ("rw/#", "rw/traffic"),
        ("rw/#", "rw"),
        ("dt/+/result", "dt/eval/result"),
        ("dt/+", "dt/eval/result"),
        ("+/traffic", "rw/traffic"),
    ] {
        let f = validate_filter(filter)?;
        println!("{filter:<12} {topic:<15} {}", topic_matches(&f, topic));
    }
    Ok(())
}
