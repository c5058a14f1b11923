// The worker side of the protocol: a blocking single-request loop that
// answers every well-formed request with exactly one response, in order.
// Model code plugs in through a single hook; anything it throws turns into
// an ok:false response and the loop keeps serving. Only protocol bytes ever
// reach stdout — put diagnostics on stderr.

import { Readable, Writable } from 'stream';

import { FrameDecoder, MalformedFrameError, Message, encodeMessage } from './protocol';

export const PROTOCOL_VERSION = 1;

export type WorkerOp = 'extract' | 'score';

export interface HookRequest {
  op: WorkerOp;
  input: Float32Array;
  enrollment: Float32Array;
  sampleRate: number;
}

/**
 * User-supplied model call. Return the estimate samples for `extract`
 * requests, or a scalar score for `score` requests. Wrap a real pretrained
 * model by loading it once at startup and invoking it here; see cli.ts for
 * the built-in identity and constant hooks.
 */
export type ModelHook = (request: HookRequest) => Float32Array | number | Promise<Float32Array | number>;

export interface WorkerSession {
  declaredOps: WorkerOp[];
  modelHook: ModelHook;
}

function write(stream: Writable, data: Buffer): Promise<void> {
  return new Promise((resolve, reject) => {
    stream.write(data, (err) => (err ? reject(err) : resolve()));
  });
}

function errorResponse(message: string): Buffer {
  return encodeMessage({ ok: false, error: message });
}

async function answer(session: WorkerSession, message: Message, stdout: Writable): Promise<void> {
  const { header, payloads } = message;
  const op = header.op;

  if (op === 'hello') {
    await write(stdout, encodeMessage({ ok: true, ops: session.declaredOps }));
    return;
  }
  if (op !== 'extract' && op !== 'score') {
    await write(stdout, errorResponse(`unsupported op: ${String(op)}`));
    return;
  }
  if (!session.declaredOps.includes(op)) {
    await write(stdout, errorResponse(`unsupported op: ${op}`));
    return;
  }

  const input = payloads.get('input');
  const enrollment = payloads.get('enrollment');
  if (input === undefined || enrollment === undefined) {
    await write(stdout, errorResponse(`${op} request needs 'input' and 'enrollment' payloads`));
    return;
  }

  let result: Float32Array | number;
  try {
    result = await session.modelHook({
      op,
      input,
      enrollment,
      sampleRate: Number(header.sample_rate ?? 0),
    });
  } catch (err) {
    await write(stdout, errorResponse(err instanceof Error ? err.message : String(err)));
    return;
  }

  if (op === 'extract') {
    if (!(result instanceof Float32Array)) {
      await write(stdout, errorResponse('extract hook must return Float32Array samples'));
      return;
    }
    await write(
      stdout,
      encodeMessage(
        { ok: true, payloads: [{ name: 'estimate', len: result.length }] },
        { estimate: result },
      ),
    );
  } else {
    if (typeof result !== 'number' || !Number.isFinite(result)) {
      await write(stdout, errorResponse('score hook must return a finite number'));
      return;
    }
    await write(stdout, encodeMessage({ ok: true, score: result }));
  }
}

/**
 * Serve until stdin closes, then resolve (the process should exit 0).
 * Malformed frames get an error response and the loop continues.
 */
export async function serve(
  session: WorkerSession,
  stdin: Readable = process.stdin,
  stdout: Writable = process.stdout,
): Promise<void> {
  const decoder = new FrameDecoder();
  for await (const chunk of stdin) {
    for (const event of decoder.push(chunk as Buffer)) {
      if (event instanceof MalformedFrameError) {
        await write(stdout, errorResponse(event.message));
      } else {
        await answer(session, event, stdout);
      }
    }
  }
}
