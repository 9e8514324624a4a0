/**
 * Binding to the `softprune` epoch planner.
 *
 * Talks the planner's newline-delimited JSON protocol over the stdio of a
 * `python3 -m softprune planner` child process. Only the planner is exposed
 * (no trainer, no datasets); every array crosses the process boundary by
 * copy, so callers can never alias planner-internal state.
 *
 * A handle is confined to one logical caller: overlapping calls on the same
 * handle are rejected immediately rather than queued, and any operation
 * after close() throws.
 */

import { spawn, type ChildProcessWithoutNullStreams } from "node:child_process";
import { createInterface, type Interface } from "node:readline";

export interface TierSpec {
  quantile: number;
  rAggressive: number;
}

export interface PlannerPolicy {
  kind: "info_batch" | "static_hard" | "dynamic_random" | "none";
  r?: number;
  delta?: number;
  rescaleMode?: "per_sample" | "global";
  tier?: TierSpec;
  keepProb?: number;
  keepFraction?: number;
}

export interface EpochPlan {
  keptIds: number[];
  weights: number[];
  threshold: number;
  keptRatio: number;
  epoch: number;
}

/** Raised when the planner process reports a failure for a request. */
export class PlannerError extends Error {
  /** Error class name reported by the planner (e.g. "InvalidArgumentError"). */
  readonly kind: string;

  constructor(kind: string, message: string) {
    super(message);
    this.name = "PlannerError";
    this.kind = kind;
  }
}

interface WireResponse {
  ok: boolean;
  kind?: string;
  error?: string;
  [key: string]: unknown;
}

function policyToWire(policy: PlannerPolicy): Record<string, unknown> {
  const wire: Record<string, unknown> = { kind: policy.kind };
  if (policy.r !== undefined) wire.r = policy.r;
  if (policy.delta !== undefined) wire.delta = policy.delta;
  if (policy.rescaleMode !== undefined) wire.rescale_mode = policy.rescaleMode;
  if (policy.keepProb !== undefined) wire.keep_prob = policy.keepProb;
  if (policy.keepFraction !== undefined) wire.keep_fraction = policy.keepFraction;
  if (policy.tier !== undefined) {
    wire.tier = { quantile: policy.tier.quantile, r_aggressive: policy.tier.rAggressive };
  }
  return wire;
}

export interface PlannerOptions {
  /** Python interpreter to launch; defaults to "python3". */
  pythonPath?: string;
}

export class PlannerHandle {
  #proc: ChildProcessWithoutNullStreams;
  #lines: Interface;
  #pending: { resolve: (r: WireResponse) => void; reject: (e: Error) => void } | null = null;
  #closed = false;
  #epoch = 0;
  #exitError: Error | null = null;

  private constructor(proc: ChildProcessWithoutNullStreams) {
    this.#proc = proc;
    this.#lines = createInterface({ input: proc.stdout });
    this.#lines.on("line", (line) => {
      const waiter = this.#pending;
      this.#pending = null;
      if (!waiter) return; // unsolicited output; nothing awaits it
      try {
        waiter.resolve(JSON.parse(line) as WireResponse);
      } catch (err) {
        waiter.reject(err instanceof Error ? err : new Error(String(err)));
      }
    });
    proc.on("exit", (code) => {
      if (!this.#closed) {
        this.#exitError = new Error(`planner process exited unexpectedly (code ${code})`);
        const waiter = this.#pending;
        this.#pending = null;
        waiter?.reject(this.#exitError);
      }
    });
  }

  /**
   * Spawn a planner process and initialize a score table of `n` samples
   * (all scores 1, epoch 0) governed by `policy` over `totalEpochs` epochs.
   */
  static async create(
    n: number,
    totalEpochs: number,
    policy: PlannerPolicy,
    options: PlannerOptions = {},
  ): Promise<PlannerHandle> {
    const proc = spawn(options.pythonPath ?? "python3", ["-m", "softprune", "planner"], {
      stdio: ["pipe", "pipe", "pipe"],
    });
    const handle = new PlannerHandle(proc);
    try {
      const resp = await handle.#request({
        op: "create",
        n,
        total_epochs: totalEpochs,
        policy: policyToWire(policy),
      });
      handle.#epoch = resp.epoch as number;
    } catch (err) {
      proc.kill();
      throw err;
    }
    return handle;
  }

  /** Epoch counter mirrored from the planner after the last operation. */
  get epoch(): number {
    return this.#epoch;
  }

  get closed(): boolean {
    return this.#closed;
  }

  #request(payload: Record<string, unknown>): Promise<WireResponse> {
    if (this.#closed) {
      return Promise.reject(new PlannerError("InvalidArgumentError", "planner handle is closed"));
    }
    if (this.#exitError) {
      return Promise.reject(this.#exitError);
    }
    if (this.#pending) {
      return Promise.reject(
        new PlannerError("InvalidArgumentError", "concurrent call on one planner handle"),
      );
    }
    return new Promise<WireResponse>((resolve, reject) => {
      this.#pending = { resolve, reject };
      this.#proc.stdin.write(JSON.stringify(payload) + "\n");
    }).then((resp) => {
      if (!resp.ok) {
        throw new PlannerError(resp.kind ?? "PlannerError", resp.error ?? "planner request failed");
      }
      return resp;
    });
  }

  /** Plan the current epoch with the given seed. */
  async plan(seed: number): Promise<EpochPlan> {
    const resp = await this.#request({ op: "plan", seed });
    this.#epoch = resp.epoch as number;
    return {
      keptIds: [...(resp.kept_ids as number[])],
      weights: [...(resp.weights as number[])],
      threshold: resp.threshold as number,
      keptRatio: resp.kept_ratio as number,
      epoch: resp.epoch as number,
    };
  }

  /**
   * Feed back the observed per-sample losses for the last plan (in kept-id
   * order) and advance the epoch. `keptIds`, when given, must match the
   * last plan exactly.
   */
  async update(losses: number[], keptIds?: number[]): Promise<void> {
    const payload: Record<string, unknown> = { op: "update", losses: [...losses] };
    if (keptIds !== undefined) payload.kept_ids = [...keptIds];
    const resp = await this.#request(payload);
    this.#epoch = resp.epoch as number;
  }

  /** Copy of the full score vector. */
  async scores(): Promise<number[]> {
    const resp = await this.#request({ op: "scores" });
    return [...(resp.scores as number[])];
  }

  /** Shut the planner down; every later call on this handle throws. */
  async close(): Promise<void> {
    if (this.#closed) return;
    await this.#request({ op: "close" });
    this.#closed = true;
    this.#proc.stdin.end();
  }
}
