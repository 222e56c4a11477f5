import { describe, expect, it } from "vitest";

import {
  deployEnabled,
  renderCandidates,
  renderDeployDialog,
  type CandidatesView,
} from "../src/candidates.js";
import type { Candidate } from "../src/types.js";

function cand(id: string, verdict: string | null): Candidate {
  return {
    id,
    policy_version: `v-${id}`,
    estimates: { eng: 1.0 + id.length, thr: 2.0 },
    intervals: { eng: [0.9, 1.1], thr: [1.9, 2.1] },
    reward_weights: { eng: 0.5, thr: 0.5 },
    manifest_id: `m-${id}`,
    canary_verdict: verdict,
    source_job: "job1",
  };
}

describe("deployEnabled", () => {
  it("passing or unjudged candidates deploy without a reason", () => {
    expect(deployEnabled("promote", "")).toBe(true);
    expect(deployEnabled(null, "")).toBe(true);
  });

  it("rejected candidates need a non-blank override reason", () => {
    expect(deployEnabled("reject", "")).toBe(false);
    expect(deployEnabled("reject", "   ")).toBe(false);
    expect(deployEnabled("reject", "metric dip accepted for cost win")).toBe(
      true,
    );
  });
});

describe("deploy dialog rendering", () => {
  it("disables the button for a rejected candidate until a reason exists", () => {
    document.body.innerHTML = renderDeployDialog(cand("a", "reject"), "");
    const btn = document.getElementById("deploy-btn") as HTMLButtonElement;
    expect(btn.disabled).toBe(true);
    expect(document.getElementById("override-reason")).not.toBeNull();

    document.body.innerHTML = renderDeployDialog(cand("a", "reject"), "ok");
    expect(
      (document.getElementById("deploy-btn") as HTMLButtonElement).disabled,
    ).toBe(false);
  });

  it("passing candidates get no override box and an enabled button", () => {
    document.body.innerHTML = renderDeployDialog(cand("a", "promote"), "");
    expect(document.getElementById("override-reason")).toBeNull();
    expect(
      (document.getElementById("deploy-btn") as HTMLButtonElement).disabled,
    ).toBe(false);
  });

  it("shows the gateway's intervals verbatim", () => {
    document.body.innerHTML = renderDeployDialog(cand("a", null), "");
    expect(document.body.innerHTML).toContain("[0.9000, 1.1000]");
  });
});

describe("candidates view", () => {
  it("renders a row per candidate and the scatter", () => {
    const view: CandidatesView = {
      candidates: [cand("a", "promote"), cand("bb", null)],
      metricX: "eng",
      metricY: "thr",
      selectedId: null,
      overrideReason: "",
    };
    document.body.innerHTML = renderCandidates(view);
    expect(document.querySelectorAll("tr.candidate")).toHaveLength(2);
    expect(document.querySelectorAll("svg.pareto circle")).toHaveLength(2);
    expect(document.querySelector(".deploy-dialog")).toBeNull();
  });

  it("selecting a candidate opens its dialog", () => {
    const view: CandidatesView = {
      candidates: [cand("a", "promote")],
      metricX: "eng",
      metricY: "thr",
      selectedId: "a",
      overrideReason: "",
    };
    document.body.innerHTML = renderCandidates(view);
    const dialog = document.querySelector(".deploy-dialog") as HTMLElement;
    expect(dialog.dataset.candidate).toBe("a");
  });
});
