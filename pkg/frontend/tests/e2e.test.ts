/**
 * End-to-end test against a live gateway. A fixture script boots the real
 * platform, seeds an "engage" use case with simulator episodes, runs a
 * reward-tuning job and deploys an initial champion; everything in this
 * file then goes through the HTTP API exactly as the console does.
 */
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { spawn, type ChildProcess } from "node:child_process";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";

import { GatewayClient } from "../src/api.js";
import { renderCandidates } from "../src/candidates.js";
import { initialWizard, next, prepareSubmit, updateDraft } from "../src/wizard.js";
import type { Candidate } from "../src/types.js";

const PORT = 8930 + (process.pid % 500);
const BASE = `http://127.0.0.1:${PORT}`;
const FIXTURE = join(
  dirname(fileURLToPath(import.meta.url)),
  "fixtures",
  "serve_fixture.py",
);

let server: ChildProcess;
const client = new GatewayClient(BASE);

async function waitForGateway(): Promise<void> {
  const deadline = Date.now() + 90_000;
  for (;;) {
    try {
      await client.describe("engage");
      return;
    } catch {
      if (Date.now() > deadline) throw new Error("gateway never came up");
      await new Promise((r) => setTimeout(r, 500));
    }
  }
}

beforeAll(async () => {
  server = spawn("python3", [FIXTURE, String(PORT)], {
    stdio: ["ignore", "inherit", "inherit"],
  });
  await waitForGateway();
});

afterAll(() => {
  server?.kill();
});

describe("console against a live gateway", () => {
  it("onboarding wizard creates a use case via the gateway", async () => {
    let s = initialWizard([{ name: "activity_7d", type: "numeric" }]);
    s = updateDraft(s, {
      id: "promo-e2e",
      actions: ["keep", "send"],
      metrics: [
        {
          name: "success",
          direction: "maximize",
          timing: "immediate",
          aggregation: "mean",
        },
      ],
    });
    s = next(next(next(s))); // decisions -> metrics -> features -> review
    expect(s.step).toBe("review");
    const { request } = prepareSubmit(s);
    expect(request).not.toBeNull();

    const resp = await client.onboard(request!);
    expect(resp.id).toBe("promo-e2e");
    expect(resp.recommended_features.length).toBeGreaterThan(0);

    const info = await client.describe("promo-e2e");
    expect(info.actions).toEqual(["keep", "send"]);
    expect(info.champion).toBeNull();
  });

  it("candidates view renders the tuning run's Pareto front", async () => {
    const candidates = await client.candidates("engage");
    expect(candidates.length).toBeGreaterThanOrEqual(2);
    for (const c of candidates) {
      expect(Object.keys(c.estimates).sort()).toEqual(["engagement", "thrift"]);
    }
    document.body.innerHTML = renderCandidates({
      candidates,
      metricX: "engagement",
      metricY: "thrift",
      selectedId: null,
      overrideReason: "",
    });
    const circles = document.querySelectorAll("svg.pareto circle");
    expect(circles).toHaveLength(candidates.length);
    expect(
      document.querySelectorAll("svg.pareto circle.front").length,
    ).toBeGreaterThanOrEqual(2);
  });

  it("deploying a passing candidate flips the served policy version", async () => {
    const before = await client.decide("engage", "unit-1", { state: 0 }, 1);
    const candidates = await client.candidates("engage");
    const challenger = candidates.reduce((a: Candidate, b: Candidate) =>
      b.estimates["engagement"] > a.estimates["engagement"] ? b : a,
    );
    expect(challenger.policy_version).not.toBe(before.policy_version);

    const deployed = await client.deploy("engage", challenger.id);
    expect(deployed.policy_version).toBe(challenger.policy_version);

    const after = await client.decide("engage", "unit-2", { state: 0 }, 2);
    expect(after.policy_version).toBe(challenger.policy_version);
    expect(after.policy_version).not.toBe(before.policy_version);

    const info = await client.describe("engage");
    expect(info.policy_version).toBe(challenger.policy_version);
  });
});
