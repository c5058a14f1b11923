// Built-in model hooks: an identity extractor and a constant scorer, enough
// to prove protocol conformance end to end. Real models follow the same
// shape — load once, then map (input, enrollment, sampleRate) to samples or
// a scalar inside the hook.

import { HookRequest, ModelHook } from './serve';

/** Echoes the mixture back as the estimate. */
export const identityExtract: ModelHook = ({ op, input }: HookRequest) => {
  if (op !== 'extract') throw new Error(`unsupported op: ${op}`);
  return input;
};

/** Always returns the same score, regardless of the audio. */
export function constantScore(value = 2.5): ModelHook {
  return ({ op }: HookRequest) => {
    if (op !== 'score') throw new Error(`unsupported op: ${op}`);
    return value;
  };
}

/** Route extract and score requests to separate hooks. */
export function combineHooks(extract: ModelHook, score: ModelHook): ModelHook {
  return (request: HookRequest) => (request.op === 'extract' ? extract(request) : score(request));
}

/*
 * Stub for wrapping a real pretrained model (kept out of the build on
 * purpose — model runtimes are user code):
 *
 *   const model = await loadMyTseModel("checkpoint.pt");
 *   const hook: ModelHook = async ({ input, enrollment, sampleRate }) =>
 *     new Float32Array(await model.separate(input, enrollment, sampleRate));
 *   serve({ declaredOps: ["extract"], modelHook: hook });
 */
