import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "jsdom",
    include: ["test/**/*.test.ts"],
    // the smoke test asserts its own wall-clock budget; this is the backstop
    testTimeout: 30_000,
  },
});
