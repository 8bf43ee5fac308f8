import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    globalSetup: ["test/setup/live.ts"],
    testTimeout: 30_000,
    hookTimeout: 90_000,
    // the live tests walk one session through a conversation; keep order
    sequence: { concurrent: false },
  },
});
