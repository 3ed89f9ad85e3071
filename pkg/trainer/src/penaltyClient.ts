/**
 * Client for the structsent penalty line protocol.
 *
 * Spawns `python3 -m structsent penalty --mode <mode> --stdin` as a child
 * process and exchanges one JSON object per line: requests carry an id and
 * a batch of candidate strings, responses the failure count and penalty
 * fraction. Responses arrive strictly in request order.
 */

import { ChildProcessWithoutNullStreams, spawn } from "node:child_process";
import { createInterface, Interface } from "node:readline";
import type { PenaltyMode } from "./config.js";

export class PenaltyServiceDown extends Error {}

export interface PenaltyResult {
  id: string;
  failures: number;
  batchSize: number;
  penalty: number;
  /** Raw response line, for bit-exact comparisons. */
  raw: string;
}

interface Pending {
  resolve: (result: PenaltyResult) => void;
  reject: (error: Error) => void;
  timer: NodeJS.Timeout;
}

export const DEFAULT_COMMAND = ["python3", "-m", "structsent", "penalty"];

export class PenaltyClient {
  private child: ChildProcessWithoutNullStreams;
  private reader: Interface;
  private pending: Pending[] = [];
  private closed = false;
  private stderrTail = "";

  constructor(
    mode: PenaltyMode = "strict",
    command: string[] = DEFAULT_COMMAND,
    private timeoutMs = 30_000,
  ) {
    const argv = [...command.slice(1), "--mode", mode, "--stdin"];
    this.child = spawn(command[0], argv, { stdio: ["pipe", "pipe", "pipe"] });
    this.child.stderr.on("data", (chunk: Buffer) => {
      this.stderrTail = (this.stderrTail + chunk.toString()).slice(-2000);
    });
    this.reader = createInterface({ input: this.child.stdout });
    this.reader.on("line", (line) => this.onLine(line));
    this.child.on("error", (error) => this.failAll(`spawn failed: ${error.message}`));
    this.child.on("exit", (code) => {
      if (!this.closed || this.pending.length > 0) {
        this.failAll(`penalty service exited with code ${code}: ${this.stderrTail}`);
      }
    });
  }

  private onLine(line: string): void {
    const entry = this.pending.shift();
    if (!entry) return;
    clearTimeout(entry.timer);
    let message: Record<string, unknown>;
    try {
      message = JSON.parse(line);
    } catch {
      entry.reject(new PenaltyServiceDown(`unparseable response line: ${line}`));
      return;
    }
    if (typeof message.error === "string") {
      entry.reject(new PenaltyServiceDown(`protocol error for ${message.id}: ${message.error}`));
      return;
    }
    entry.resolve({
      id: String(message.id),
      failures: message.failures as number,
      batchSize: message.batch_size as number,
      penalty: message.penalty as number,
      raw: line,
    });
  }

  private failAll(reason: string): void {
    const waiting = this.pending;
    this.pending = [];
    for (const entry of waiting) {
      clearTimeout(entry.timer);
      entry.reject(new PenaltyServiceDown(reason));
    }
  }

  /** Penalty fragment for one decoded batch; rejects on any service fault. */
  penalty(id: string, candidates: string[], mode?: PenaltyMode): Promise<PenaltyResult> {
    if (this.closed) {
      return Promise.reject(new PenaltyServiceDown("client already closed"));
    }
    const request: Record<string, unknown> = { id, candidates };
    if (mode) request.mode = mode;
    const line = JSON.stringify(request) + "\n";
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => {
        this.pending = this.pending.filter((p) => p.timer !== timer);
        reject(new PenaltyServiceDown(`no response for ${id} within ${this.timeoutMs}ms`));
      }, this.timeoutMs);
      this.pending.push({ resolve, reject, timer });
      this.child.stdin.write(line, (error) => {
        if (error) {
          clearTimeout(timer);
          this.pending = this.pending.filter((p) => p.timer !== timer);
          reject(new PenaltyServiceDown(`write failed: ${error.message}`));
        }
      });
    });
  }

  close(): void {
    this.closed = true;
    this.failAll("client closed");
    this.reader.close();
    this.child.stdin.end();
    this.child.kill();
  }
}

/** Independent in-harness strict check: one JSON object, nothing else. */
export function strictJsonObject(candidate: string): boolean {
  try {
    const value = JSON.parse(candidate.trim());
    return typeof value === "object" && value !== null && !Array.isArray(value);
  } catch {
    return false;
  }
}
