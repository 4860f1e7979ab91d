import { createServer, type Server } from 'node:http';
import type { AddressInfo } from 'node:net';

import { afterAll, beforeAll, describe, expect, it, vi } from 'vitest';

import { ApiClient } from '../src/api.js';
import { InteractionReporter } from '../src/events.js';
import type { EventRecord } from '../src/types.js';

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

async function waitFor(
  predicate: () => boolean,
  timeoutMs = 2000,
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (!predicate() && Date.now() < deadline) {
    await sleep(10);
  }
}

describe('hover debounce against a mock server', () => {
  let server: Server;
  let baseUrl: string;
  const received: EventRecord[] = [];

  beforeAll(async () => {
    server = createServer((req, res) => {
      let body = '';
      req.on('data', (chunk) => (body += chunk));
      req.on('end', () => {
        received.push(JSON.parse(body) as EventRecord);
        res.writeHead(200, { 'Content-Type': 'application/json' });
        res.end(JSON.stringify({ id: received.length }));
      });
    });
    await new Promise<void>((resolve) => server.listen(0, resolve));
    baseUrl = `http://127.0.0.1:${(server.address() as AddressInfo).port}`;
  });

  afterAll(() => {
    server.close();
  });

  const ofSession = (id: string) =>
    received.filter((e) => e.session_id === id);

  it('a 300 ms dwell posts exactly one curve_hover event', async () => {
    const api = new ApiClient(baseUrl);
    const reporter = new InteractionReporter({
      sessionId: 's1',
      post: (e) => api.postEvent(e),
      hoverDebounceMs: 200,
    });
    reporter.hoverStart({ visit: 3 });
    await sleep(300);
    reporter.hoverEnd();
    await waitFor(() => ofSession('s1').length > 0);
    const mine = ofSession('s1');
    expect(mine).toHaveLength(1);
    expect(mine[0].kind).toBe('curve_hover');
    expect(mine[0].payload).toEqual({ visit: 3 });
  });

  it('a sweep of sub-200 ms dwells posts nothing', async () => {
    const api = new ApiClient(baseUrl);
    const reporter = new InteractionReporter({
      sessionId: 's2',
      post: (e) => api.postEvent(e),
      hoverDebounceMs: 200,
    });
    for (let i = 0; i < 3; i++) {
      reporter.hoverStart({ visit: i });
      await sleep(50);
    }
    reporter.hoverEnd();
    await sleep(400);
    expect(ofSession('s2')).toHaveLength(0);
  });

  it('a list page-down posts one list_paging event', async () => {
    const api = new ApiClient(baseUrl);
    const reporter = new InteractionReporter({
      sessionId: 's3',
      post: (e) => api.postEvent(e),
    });
    reporter.emit('list_paging', { page: 2 });
    await waitFor(() => ofSession('s3').length > 0);
    const mine = ofSession('s3');
    expect(mine).toHaveLength(1);
    expect(mine[0].kind).toBe('list_paging');
  });
});

describe('retry queue', () => {
  it('retries with backoff until the post succeeds', async () => {
    vi.useFakeTimers();
    try {
      let failures = 3;
      const post = vi.fn((event: EventRecord) => {
        void event;
        if (failures > 0) {
          failures -= 1;
          return Promise.reject(new Error('connection refused'));
        }
        return Promise.resolve({});
      });
      const reporter = new InteractionReporter({
        sessionId: 's4',
        post,
        retryBaseMs: 100,
      });
      reporter.emit('feature_select', { feature: 'dyn_00' });
      await vi.advanceTimersByTimeAsync(100 + 200 + 400);
      expect(post).toHaveBeenCalledTimes(4);
      expect(reporter.sent).toBe(1);
      expect(reporter.dropped).toBe(0);
      expect(reporter.pending).toBe(0);
    } finally {
      vi.useRealTimers();
    }
  });

  it('drops an event after the attempt limit', async () => {
    vi.useFakeTimers();
    try {
      const post = vi.fn(() => Promise.reject(new Error('down')));
      const reporter = new InteractionReporter({
        sessionId: 's5',
        post,
        retryBaseMs: 1,
        maxAttempts: 10,
      });
      reporter.emit('cross_view');
      await vi.advanceTimersByTimeAsync(10_000);
      expect(post).toHaveBeenCalledTimes(10);
      expect(reporter.dropped).toBe(1);
      expect(reporter.pending).toBe(0);
    } finally {
      vi.useRealTimers();
    }
  });

  it('preserves queue order across a transient failure', async () => {
    vi.useFakeTimers();
    try {
      const delivered: string[] = [];
      let failFirst = true;
      const post = vi.fn((event: EventRecord) => {
        if (failFirst) {
          failFirst = false;
          return Promise.reject(new Error('flaky'));
        }
        delivered.push(event.kind);
        return Promise.resolve({});
      });
      const reporter = new InteractionReporter({
        sessionId: 's6',
        post,
        retryBaseMs: 100,
      });
      reporter.emit('list_paging');
      reporter.emit('feature_select');
      await vi.advanceTimersByTimeAsync(500);
      expect(delivered).toEqual(['list_paging', 'feature_select']);
    } finally {
      vi.useRealTimers();
    }
  });
});
