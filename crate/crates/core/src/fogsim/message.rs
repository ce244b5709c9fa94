use std::fmt;

use crate::error::{Error, Result};
use crate::wire::{Decode, Encode, Reader, Writer};

/// A participant in the simulated deployment.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PartyId {
    Authority,
    Fog,
    Cloud,
    Object(String),
    User(String),
}

impl PartyId {
    pub fn name(&self) -> &str {
        match self {
            PartyId::Authority => "aa",
            PartyId::Fog => "fog",
            PartyId::Cloud => "cloud",
            PartyId::Object(n) | PartyId::User(n) => n,
        }
    }

    fn tag(&self) -> String {
        match self {
            PartyId::Authority => "aa".into(),
            PartyId::Fog => "fog".into(),
            PartyId::Cloud => "cloud".into(),
            PartyId::Object(n) => format!("object:{n}"),
            PartyId::User(n) => format!("user:{n}"),
        }
    }

    fn from_tag(s: &str) -> Result<Self> {
        Ok(match s {
            "aa" => PartyId::Authority,
            "fog" => PartyId::Fog,
            "cloud" => PartyId::Cloud,
            _ => match s.split_once(':') {
                Some(("object", n)) if !n.is_empty() => PartyId::Object(n.into()),
                Some(("user", n)) if !n.is_empty() => PartyId::User(n.into()),
                _ => return Err(Error::InvalidEncoding(format!("unknown party {s:?}"))),
            },
        })
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

/// Message kinds with their frozen wire codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u32)]
pub enum MessageKind {
    /// aa -> client: public parameters and the client's attribute key.
    KeyIssue = 1,
    /// object -> fog: fname, spk, key ciphertext, sealed payload.
    Upload = 2,
    /// fog -> cloud: fname, spk, sealed payload.
    CloudUpload = 3,
    /// client -> fog: fname.
    FetchCt = 4,
    /// fog -> client: fname, key ciphertext.
    CtReply = 5,
    /// client -> cloud: fname.
    FetchPayload = 6,
    /// cloud -> client: fname, sealed payload.
    PayloadReply = 7,
    /// fog or cloud -> client: fname that is not stored.
    NotFound = 8,
    /// object -> fog: signed deletion request.
    DelRequest = 9,
    /// fog -> cloud: the owner's deletion request, forwarded verbatim.
    CloudDelete = 10,
    /// cloud -> fog: fname whose payload was removed.
    CloudDeleteAck = 11,
    /// fog -> object: fname, signed eta.
    DelResponse = 12,
}

impl MessageKind {
    pub fn code(self) -> u32 {
        self as u32
    }

    pub fn from_code(code: u32) -> Result<Self> {
        use MessageKind::*;
        Ok(match code {
            1 => KeyIssue,
            2 => Upload,
            3 => CloudUpload,
            4 => FetchCt,
            5 => CtReply,
            6 => FetchPayload,
            7 => PayloadReply,
            8 => NotFound,
            9 => DelRequest,
            10 => CloudDelete,
            11 => CloudDeleteAck,
            12 => DelResponse,
            other => {
                return Err(Error::InvalidEncoding(format!("unknown message kind {other}")))
            }
        })
    }
}

/// An envelope on the simulated transport. `body` is a TLV stream whose
/// schema is fixed by `kind`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Message {
    pub sender: PartyId,
    pub receiver: PartyId,
    pub kind: MessageKind,
    pub body: Vec<u8>,
}

impl Message {
    pub fn new(sender: PartyId, receiver: PartyId, kind: MessageKind, body: Writer) -> Self {
        Message {
            sender,
            receiver,
            kind,
            body: body.into_stream(),
        }
    }

    pub fn body_reader(&self) -> Result<Reader<'_>> {
        Reader::stream(&self.body)
    }
}

impl Encode for Message {
    fn encode_records(&self, w: &mut Writer) {
        w.label(&self.sender.tag())
            .label(&self.receiver.tag())
            .uint(self.kind.code())
            .bytes(&self.body);
    }
}

impl Decode for Message {
    fn decode_records(r: &mut Reader<'_>) -> Result<Self> {
        let sender = PartyId::from_tag(&r.label()?)?;
        let receiver = PartyId::from_tag(&r.label()?)?;
        let kind = MessageKind::from_code(r.uint()?)?;
        let body = r.bytes()?;
        Reader::stream(&body)?;
        Ok(Message {
            sender,
            receiver,
            kind,
            body,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_roundtrip_and_unknown_kind() {
        let mut w = Writer::new();
        w.uint(7);
        let m = Message::new(PartyId::User("alice".into()), PartyId::Fog, MessageKind::FetchCt, w);
        let bytes = m.to_bytes();
        assert_eq!(Message::from_bytes(&bytes).unwrap(), m);

        let mut forged = Writer::new();
        forged.label("fog").label("cloud").uint(99).bytes(b"CPAD\x01");
        assert!(Message::from_bytes(&forged.into_stream()).is_err());
        assert!(MessageKind::from_code(0).is_err());
    }

    #[test]
    fn party_tags_roundtrip() {
        for p in [
            PartyId::Authority,
            PartyId::Fog,
            PartyId::Cloud,
            PartyId::Object("obj".into()),
            PartyId::User("bob".into()),
        ] {
            assert_eq!(PartyId::from_tag(&p.to_string()).unwrap(), p);
        }
        assert!(PartyId::from_tag("mallory").is_err());
        assert!(PartyId::from_tag("user:").is_err());
    }
}
