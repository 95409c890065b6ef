//! Wire protocol for the twin link: a strict MQTT 3.1.1 subset.
//!
//! Only the nine packet types the link needs are supported (no retained
//! messages, wills, QoS 2 or persistent sessions). Everything here is a pure
//! function over byte buffers.

mod codec;
mod topic;

pub use codec::{
    decode, decode_remaining_length, encode, encode_remaining_length, read_packet, write_packet,
    CodecError, ControlPacket, QoS, ReadError, MAX_REMAINING_LENGTH,
};
pub use topic::{topic_matches, validate_filter, validate_topic, TopicError, TopicFilter};
