// End-to-end conformance: spawn the built CLI and speak the wire protocol
// to it the way the engine does. `npm test` builds dist/ first (pretest).

import { spawn, ChildProcessWithoutNullStreams } from 'child_process';
import * as path from 'path';

import { afterEach, describe, expect, it } from 'vitest';

import { FrameDecoder, MalformedFrameError, Message, encodeMessage, float32Bytes } from '../src/protocol';

const CLI = path.resolve(__dirname, '..', 'dist', 'cli.js');

class WorkerClient {
  readonly child: ChildProcessWithoutNullStreams;
  private decoder = new FrameDecoder();
  private inbox: Message[] = [];
  private waiters: Array<(m: Message) => void> = [];

  constructor(mode: string) {
    this.child = spawn(process.execPath, [CLI, mode], { stdio: ['pipe', 'pipe', 'inherit'] });
    this.child.stdout.on('data', (chunk: Buffer) => {
      for (const event of this.decoder.push(chunk)) {
        if (event instanceof MalformedFrameError) throw event;
        const waiter = this.waiters.shift();
        if (waiter) waiter(event);
        else this.inbox.push(event);
      }
    });
  }

  send(header: Record<string, unknown>, payloads?: Record<string, Float32Array>): void {
    this.child.stdin.write(encodeMessage(header, payloads));
  }

  sendRaw(bytes: Buffer): void {
    this.child.stdin.write(bytes);
  }

  receive(timeoutMs = 5000): Promise<Message> {
    const queued = this.inbox.shift();
    if (queued) return Promise.resolve(queued);
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error('timed out waiting for response')), timeoutMs);
      this.waiters.push((message) => {
        clearTimeout(timer);
        resolve(message);
      });
    });
  }

  exitCode(): Promise<number | null> {
    return new Promise((resolve) => this.child.once('exit', (code) => resolve(code)));
  }

  close(): void {
    if (this.child.exitCode === null) this.child.kill();
  }
}

function extractRequest(input: Float32Array, enrollment: Float32Array) {
  return {
    header: {
      op: 'extract',
      sample_rate: 16000,
      payloads: [
        { name: 'input', len: input.length },
        { name: 'enrollment', len: enrollment.length },
      ],
    },
    payloads: { input, enrollment },
  };
}

function ramp(n: number, scale = 1e-3): Float32Array {
  const out = new Float32Array(n);
  for (let i = 0; i < n; i++) out[i] = Math.fround(Math.sin(i * 0.37) * scale * (i + 1));
  return out;
}

describe('reference adapter conformance', () => {
  let client: WorkerClient;
  afterEach(() => client?.close());

  it('answers the handshake with its declared ops', async () => {
    client = new WorkerClient('both');
    client.send({ op: 'hello', version: 1 });
    const reply = await client.receive();
    expect(reply.header.ok).toBe(true);
    expect(reply.header.ops).toEqual(['extract', 'score']);
  });

  it('echoes extract payloads bit-exactly, one response per request, in order', async () => {
    client = new WorkerClient('identity');
    client.send({ op: 'hello', version: 1 });
    await client.receive();
    const enrollment = ramp(64);
    const inputs = [ramp(1), ramp(100), ramp(4096), ramp(33)];
    for (const input of inputs) {
      const request = extractRequest(input, enrollment);
      client.send(request.header, request.payloads);
    }
    for (const input of inputs) {
      const reply = await client.receive();
      expect(reply.header.ok).toBe(true);
      const estimate = reply.payloads.get('estimate')!;
      expect(estimate.length).toBe(input.length);
      expect(Buffer.compare(float32Bytes(estimate), float32Bytes(input))).toBe(0);
    }
  });

  it('serves scores', async () => {
    client = new WorkerClient('const-score');
    client.send({ op: 'hello', version: 1 });
    await client.receive();
    const request = extractRequest(ramp(10), ramp(10));
    client.send({ ...request.header, op: 'score' }, request.payloads);
    const reply = await client.receive();
    expect(reply.header.ok).toBe(true);
    expect(reply.header.score).toBe(2.5);
    expect(reply.payloads.size).toBe(0);
  });

  it('rejects undeclared ops but keeps serving', async () => {
    client = new WorkerClient('identity');
    const request = extractRequest(ramp(8), ramp(8));
    client.send({ ...request.header, op: 'score' }, request.payloads);
    const rejection = await client.receive();
    expect(rejection.header.ok).toBe(false);
    expect(String(rejection.header.error)).toContain('unsupported op');
    client.send(request.header, request.payloads);
    const reply = await client.receive();
    expect(reply.header.ok).toBe(true);
  });

  it('turns hook exceptions into ok:false and stays alive', async () => {
    client = new WorkerClient('raise');
    const request = extractRequest(ramp(8), ramp(8));
    for (let attempt = 0; attempt < 2; attempt++) {
      client.send(request.header, request.payloads);
      const reply = await client.receive();
      expect(reply.header.ok).toBe(false);
      expect(String(reply.header.error)).toContain('synthetic hook failure');
    }
  });

  it('answers malformed frames with an error response and keeps serving', async () => {
    client = new WorkerClient('identity');
    const bad = Buffer.alloc(8 + 4);
    bad.writeBigUInt64LE(4n, 0);
    bad.write('!!!!', 8);
    client.sendRaw(bad);
    const rejection = await client.receive();
    expect(rejection.header.ok).toBe(false);
    const request = extractRequest(ramp(5), ramp(5));
    client.send(request.header, request.payloads);
    const reply = await client.receive();
    expect(reply.header.ok).toBe(true);
  });

  it('exits 0 when stdin closes', async () => {
    client = new WorkerClient('identity');
    client.send({ op: 'hello', version: 1 });
    await client.receive();
    client.child.stdin.end();
    expect(await client.exitCode()).toBe(0);
  });

  it('crash-mid mode exits 3 without answering', async () => {
    client = new WorkerClient('crash-mid');
    const request = extractRequest(ramp(8), ramp(8));
    client.send(request.header, request.payloads);
    expect(await client.exitCode()).toBe(3);
  });

  it('wrong-length mode declares and sends a short estimate', async () => {
    client = new WorkerClient('wrong-length');
    const request = extractRequest(ramp(8), ramp(8));
    client.send(request.header, request.payloads);
    const reply = await client.receive();
    expect(reply.header.ok).toBe(true);
    expect(reply.payloads.get('estimate')!.length).toBe(7);
  });
});
