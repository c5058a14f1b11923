// Wire format shared by the engine and its workers:
//   8-byte little-endian unsigned length N,
//   N bytes of UTF-8 JSON header,
//   raw float32 little-endian payloads concatenated in header-declared order.
// Payload lengths are sample counts (4 bytes each), carried in the header's
// `payloads: [{name, len}, ...]` list.

import * as os from 'os';

if (os.endianness() !== 'LE') {
  throw new Error('worker adapter requires a little-endian platform');
}

export interface PayloadDecl {
  name: string;
  len: number;
}

export interface MessageHeader {
  [key: string]: unknown;
  payloads?: PayloadDecl[];
}

export interface Message {
  header: MessageHeader;
  payloads: Map<string, Float32Array>;
}

/** Raised for frames whose declared bytes cannot be interpreted. */
export class MalformedFrameError extends Error {}

const HEADER_CAP = 1 << 20;

function toFloat32(bytes: Buffer): Float32Array {
  // Copy into a fresh ArrayBuffer so the view is always 4-byte aligned.
  const out = new Float32Array(bytes.length / 4);
  bytes.copy(Buffer.from(out.buffer));
  return out;
}

export function float32Bytes(samples: Float32Array): Buffer {
  return Buffer.from(samples.buffer, samples.byteOffset, samples.length * 4);
}

export function encodeMessage(
  header: MessageHeader,
  payloads?: Record<string, Float32Array>,
): Buffer {
  const blob = Buffer.from(JSON.stringify(header), 'utf8');
  const prefix = Buffer.alloc(8);
  prefix.writeBigUInt64LE(BigInt(blob.length), 0);
  const parts: Buffer[] = [prefix, blob];
  for (const decl of header.payloads ?? []) {
    const samples = payloads?.[decl.name];
    if (samples === undefined || samples.length !== decl.len) {
      throw new Error(`payload '${decl.name}' missing or not ${decl.len} samples`);
    }
    parts.push(float32Bytes(samples));
  }
  return Buffer.concat(parts);
}

function declaredPayloadBytes(header: MessageHeader): number {
  let total = 0;
  for (const decl of header.payloads ?? []) {
    if (typeof decl !== 'object' || typeof decl.name !== 'string' || !Number.isInteger(decl.len) || decl.len < 0) {
      throw new MalformedFrameError(`bad payload declaration: ${JSON.stringify(decl)}`);
    }
    total += 4 * decl.len;
  }
  return total;
}

/**
 * Incremental decoder: feed it arbitrary chunks, collect complete messages.
 * A frame whose declared bytes cannot be interpreted is consumed and shows
 * up in the event stream as a MalformedFrameError, in order, so the caller
 * can answer it with an error response and keep serving later frames.
 */
export class FrameDecoder {
  private buffer: Buffer = Buffer.alloc(0);

  push(chunk: Buffer): Array<Message | MalformedFrameError> {
    this.buffer = this.buffer.length === 0 ? chunk : Buffer.concat([this.buffer, chunk]);
    const events: Array<Message | MalformedFrameError> = [];
    for (;;) {
      try {
        const message = this.next();
        if (message === null) break;
        events.push(message);
      } catch (err) {
        if (err instanceof MalformedFrameError) {
          events.push(err);
          continue;
        }
        throw err;
      }
    }
    return events;
  }

  private next(): Message | null {
    if (this.buffer.length < 8) return null;
    const headerLen = Number(this.buffer.readBigUInt64LE(0));
    if (headerLen === 0 || headerLen > HEADER_CAP) {
      this.buffer = this.buffer.subarray(8);
      throw new MalformedFrameError(`implausible header length ${headerLen}`);
    }
    if (this.buffer.length < 8 + headerLen) return null;

    let header: MessageHeader;
    try {
      header = JSON.parse(this.buffer.subarray(8, 8 + headerLen).toString('utf8'));
    } catch (err) {
      this.buffer = this.buffer.subarray(8 + headerLen);
      throw new MalformedFrameError(`header is not valid JSON: ${err}`);
    }
    let payloadBytes: number;
    try {
      payloadBytes = declaredPayloadBytes(header);
    } catch (err) {
      this.buffer = this.buffer.subarray(8 + headerLen);
      throw err;
    }
    if (this.buffer.length < 8 + headerLen + payloadBytes) return null;

    const payloads = new Map<string, Float32Array>();
    let offset = 8 + headerLen;
    for (const decl of header.payloads ?? []) {
      payloads.set(decl.name, toFloat32(this.buffer.subarray(offset, offset + 4 * decl.len)));
      offset += 4 * decl.len;
    }
    this.buffer = this.buffer.subarray(offset);
    return { header, payloads };
  }
}
