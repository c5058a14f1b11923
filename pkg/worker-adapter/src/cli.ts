#!/usr/bin/env node
// Entry point. Behaviors:
//   identity       serve an identity extractor (default)
//   const-score    serve a constant scorer (2.5)
//   both           identity extractor plus constant scorer
//   raise          extract hook that always throws (worker must stay alive)
//   crash-mid      exit 3 after reading a request, without responding
//   wrong-length   answer extracts with one sample missing
//
// The last two deliberately violate the protocol so engine-side error
// handling can be exercised; they bypass serve() and drive the frame
// primitives directly.

import { FrameDecoder, MalformedFrameError, Message, encodeMessage } from './protocol';
import { combineHooks, constantScore, identityExtract } from './hooks';
import { serve, WorkerSession } from './serve';

function misbehave(handle: (message: Message) => Buffer | 'crash'): void {
  const decoder = new FrameDecoder();
  process.stdin.on('data', (chunk: Buffer) => {
    for (const event of decoder.push(chunk)) {
      if (event instanceof MalformedFrameError) continue;
      if (event.header.op === 'hello') {
        process.stdout.write(encodeMessage({ ok: true, ops: ['extract'] }));
        continue;
      }
      const reply = handle(event);
      if (reply === 'crash') process.exit(3);
      process.stdout.write(reply);
    }
  });
  process.stdin.on('end', () => process.exit(0));
}

function main(): void {
  const mode = process.argv[2] ?? 'identity';
  const sessions: Record<string, WorkerSession> = {
    identity: { declaredOps: ['extract'], modelHook: identityExtract },
    'const-score': { declaredOps: ['score'], modelHook: constantScore(2.5) },
    both: {
      declaredOps: ['extract', 'score'],
      modelHook: combineHooks(identityExtract, constantScore(2.5)),
    },
    raise: {
      declaredOps: ['extract'],
      modelHook: () => {
        throw new Error('synthetic hook failure');
      },
    },
  };

  if (mode in sessions) {
    serve(sessions[mode])
      .then(() => process.exit(0))
      .catch((err) => {
        process.stderr.write(`worker failed: ${err}\n`);
        process.exit(1);
      });
    return;
  }
  if (mode === 'crash-mid') {
    misbehave(() => 'crash');
    return;
  }
  if (mode === 'wrong-length') {
    misbehave((message) => {
      const input = message.payloads.get('input') ?? new Float32Array(1);
      const estimate = input.subarray(0, Math.max(input.length - 1, 0));
      return encodeMessage(
        { ok: true, payloads: [{ name: 'estimate', len: estimate.length }] },
        { estimate },
      );
    });
    return;
  }
  process.stderr.write(`unknown mode: ${mode}\n`);
  process.exit(2);
}

main();
