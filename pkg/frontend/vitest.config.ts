import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // the service suite boots a real server process, so be generous
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
